#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace trajgraph::nn {

namespace detail {

struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Accumulates this node's grad into the grads of requiring parents.
    std::function<void(Node&)> backward_fn;

    std::size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantics handle to a tape node. Copies share storage; gradients of
// parameter tensors accumulate across backward() calls until zero_grad().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor from_vector(std::vector<double> values, bool requires_grad = false);
    static Tensor from_matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                              bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->size(); }
    std::size_t rows() const { return node_->shape.at(0); }
    std::size_t cols() const { return node_->shape.at(1); }

    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool requires_grad() const { return node_->requires_grad; }

    double scalar() const;

    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Reverse sweep from a scalar root; each reachable node is visited exactly
// once in reverse-topological order.
void backward(const Tensor& root);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// alpha * a + beta, elementwise
Tensor affine(const Tensor& a, double alpha, double beta);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);

// x[m,k] * w[n,k]^T -> [m,n]
Tensor linear(const Tensor& x, const Tensor& w);
// w[m,n] * x[n] -> [m]
Tensor matvec(const Tensor& w, const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor concat(const Tensor& a, const Tensor& b);

// out[v] = mean of x rows over neighbors[v]; empty neighborhoods give zero.
Tensor neighbor_mean(const Tensor& x, const std::vector<std::vector<int>>& neighbors);
Tensor mean_rows(const Tensor& x);

// Row-wise layer normalization with learnable gain/bias.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

// Weighted binary cross-entropy of a scalar probability against y in {0,1};
// the probability is clamped to [eps, 1-eps] (clamped region has zero grad).
Tensor bce_loss(const Tensor& probability, int y, double weight, double eps = 1e-7);

// Elementwise product with a constant mask (dropout-style scaling).
Tensor mask_mul(const Tensor& a, const std::vector<double>& mask);

}  // namespace trajgraph::nn
