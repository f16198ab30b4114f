#include "trajgraph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "trajgraph/common.hpp"

namespace trajgraph::nn {

using detail::Node;

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::shared_ptr<Node> make_node(std::vector<std::size_t> shape, std::vector<double> value) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

// Records the op on the tape only when some parent requires gradients.
Tensor make_op(std::vector<std::size_t> shape, std::vector<double> value,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backward_fn) {
    auto n = make_node(std::move(shape), std::move(value));
    bool needs_grad = false;
    for (const auto& p : parents) needs_grad = needs_grad || p->requires_grad;
    if (needs_grad) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(n);
}

void check(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("tensor op: ") + what);
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto n = make_node(shape, std::vector<double>(shape_size(shape), 0.0));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_vector(std::vector<double> values, bool requires_grad) {
    std::size_t length = values.size();
    auto n = make_node({length}, std::move(values));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                           bool requires_grad) {
    check(values.size() == rows * cols, "matrix data does not match shape");
    auto n = make_node({rows, cols}, std::move(values));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

double Tensor::scalar() const {
    check(node_ && node_->size() == 1, "scalar() on non-scalar tensor");
    return node_->value[0];
}

void backward(const Tensor& root) {
    check(root.size() == 1, "backward() root must be scalar");
    Node* root_node = root.node().get();
    if (!root_node->requires_grad) return;

    // iterative post-order DFS over requiring parents
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root_node, 0}};
    seen.insert(root_node);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root_node->ensure_grad();
    root_node->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        node->ensure_grad();
        if (node->backward_fn) node->backward_fn(*node);
    }
}

namespace {

// Shorthand for accumulation guarded by requires_grad.
inline void acc(const std::shared_ptr<Node>& p, std::size_t i, double v) {
    p->grad[i] += v;
}

inline bool wants(const std::shared_ptr<Node>& p) {
    if (!p->requires_grad) return false;
    p->ensure_grad();
    return true;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add: shape mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    auto pa = a.node(), pb = b.node();
    return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& n) {
        if (wants(pa))
            for (std::size_t i = 0; i < n.size(); ++i) acc(pa, i, n.grad[i]);
        if (wants(pb))
            for (std::size_t i = 0; i < n.size(); ++i) acc(pb, i, n.grad[i]);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "sub: shape mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    auto pa = a.node(), pb = b.node();
    return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& n) {
        if (wants(pa))
            for (std::size_t i = 0; i < n.size(); ++i) acc(pa, i, n.grad[i]);
        if (wants(pb))
            for (std::size_t i = 0; i < n.size(); ++i) acc(pb, i, -n.grad[i]);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mul: shape mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    auto pa = a.node(), pb = b.node();
    return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& n) {
        if (wants(pa))
            for (std::size_t i = 0; i < n.size(); ++i) acc(pa, i, n.grad[i] * pb->value[i]);
        if (wants(pb))
            for (std::size_t i = 0; i < n.size(); ++i) acc(pb, i, n.grad[i] * pa->value[i]);
    });
}

Tensor affine(const Tensor& a, double alpha, double beta) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * a.values()[i] + beta;
    auto pa = a.node();
    return make_op(a.shape(), std::move(out), {pa}, [pa, alpha](Node& n) {
        if (wants(pa))
            for (std::size_t i = 0; i < n.size(); ++i) acc(pa, i, alpha * n.grad[i]);
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.values()[i]));
    auto pa = a.node();
    Tensor t = make_op(a.shape(), std::move(out), {pa}, nullptr);
    if (t.requires_grad()) {
        auto self = t.node();
        self->backward_fn = [pa, self_raw = self.get()](Node& n) {
            if (!wants(pa)) return;
            for (std::size_t i = 0; i < n.size(); ++i) {
                double y = self_raw->value[i];
                acc(pa, i, n.grad[i] * y * (1.0 - y));
            }
        };
    }
    return t;
}

Tensor tanh_op(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
    auto pa = a.node();
    Tensor t = make_op(a.shape(), std::move(out), {pa}, nullptr);
    if (t.requires_grad()) {
        auto self = t.node();
        self->backward_fn = [pa, self_raw = self.get()](Node& n) {
            if (!wants(pa)) return;
            for (std::size_t i = 0; i < n.size(); ++i) {
                double y = self_raw->value[i];
                acc(pa, i, n.grad[i] * (1.0 - y * y));
            }
        };
    }
    return t;
}

Tensor linear(const Tensor& x, const Tensor& w) {
    check(x.shape().size() == 2 && w.shape().size() == 2, "linear: expects matrices");
    check(x.cols() == w.cols(), "linear: inner dimension mismatch");
    std::size_t m = x.rows(), k = x.cols(), n = w.rows();
    std::vector<double> out(m * n, 0.0);
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) s += xv[i * k + l] * wv[j * k + l];
            out[i * n + j] = s;
        }
    auto px = x.node(), pw = w.node();
    return make_op({m, n}, std::move(out), {px, pw}, [px, pw, m, k, n](Node& node) {
        const auto& g = node.grad;
        if (wants(px)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (std::size_t l = 0; l < k; ++l)
                        px->grad[i * k + l] += gij * pw->value[j * k + l];
                }
        }
        if (wants(pw)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (std::size_t l = 0; l < k; ++l)
                        pw->grad[j * k + l] += gij * px->value[i * k + l];
                }
        }
    });
}

Tensor matvec(const Tensor& w, const Tensor& x) {
    check(w.shape().size() == 2 && x.shape().size() == 1, "matvec: expects matrix and vector");
    check(w.cols() == x.size(), "matvec: dimension mismatch");
    std::size_t m = w.rows(), n = w.cols();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += w.values()[i * n + j] * x.values()[j];
        out[i] = s;
    }
    auto pw = w.node(), px = x.node();
    return make_op({m}, std::move(out), {pw, px}, [pw, px, m, n](Node& node) {
        const auto& g = node.grad;
        if (wants(pw)) {
            for (std::size_t i = 0; i < m; ++i) {
                if (g[i] == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) pw->grad[i * n + j] += g[i] * px->value[j];
            }
        }
        if (wants(px)) {
            for (std::size_t i = 0; i < m; ++i) {
                if (g[i] == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) px->grad[j] += g[i] * pw->value[i * n + j];
            }
        }
    });
}

Tensor dot(const Tensor& a, const Tensor& b) {
    check(a.shape().size() == 1 && a.shape() == b.shape(), "dot: expects equal-length vectors");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    auto pa = a.node(), pb = b.node();
    return make_op({1}, {s}, {pa, pb}, [pa, pb](Node& n) {
        double g = n.grad[0];
        if (wants(pa))
            for (std::size_t i = 0; i < pa->size(); ++i) acc(pa, i, g * pb->value[i]);
        if (wants(pb))
            for (std::size_t i = 0; i < pb->size(); ++i) acc(pb, i, g * pa->value[i]);
    });
}

Tensor concat(const Tensor& a, const Tensor& b) {
    check(a.shape().size() == 1 && b.shape().size() == 1, "concat: expects vectors");
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.values().begin(), a.values().end());
    out.insert(out.end(), b.values().begin(), b.values().end());
    auto pa = a.node(), pb = b.node();
    std::size_t na = a.size();
    return make_op({a.size() + b.size()}, std::move(out), {pa, pb}, [pa, pb, na](Node& n) {
        if (wants(pa))
            for (std::size_t i = 0; i < na; ++i) acc(pa, i, n.grad[i]);
        if (wants(pb))
            for (std::size_t i = 0; i < pb->size(); ++i) acc(pb, i, n.grad[na + i]);
    });
}

Tensor neighbor_mean(const Tensor& x, const std::vector<std::vector<int>>& neighbors) {
    check(x.shape().size() == 2, "neighbor_mean: expects a matrix");
    check(neighbors.size() == x.rows(), "neighbor_mean: adjacency size mismatch");
    std::size_t m = x.rows(), d = x.cols();
    std::vector<double> out(m * d, 0.0);
    for (std::size_t v = 0; v < m; ++v) {
        const auto& ns = neighbors[v];
        if (ns.empty()) continue;  // division guard: zero aggregate
        double inv = 1.0 / static_cast<double>(ns.size());
        for (int u : ns)
            for (std::size_t j = 0; j < d; ++j)
                out[v * d + j] += x.values()[static_cast<std::size_t>(u) * d + j] * inv;
    }
    auto px = x.node();
    return make_op({m, d}, std::move(out), {px}, [px, neighbors, m, d](Node& n) {
        if (!wants(px)) return;
        for (std::size_t v = 0; v < m; ++v) {
            const auto& ns = neighbors[v];
            if (ns.empty()) continue;
            double inv = 1.0 / static_cast<double>(ns.size());
            for (int u : ns)
                for (std::size_t j = 0; j < d; ++j)
                    px->grad[static_cast<std::size_t>(u) * d + j] += n.grad[v * d + j] * inv;
        }
    });
}

Tensor mean_rows(const Tensor& x) {
    check(x.shape().size() == 2, "mean_rows: expects a matrix");
    check(x.rows() >= 1, "mean_rows: empty matrix");
    std::size_t m = x.rows(), d = x.cols();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) out[j] += x.values()[i * d + j];
    for (auto& v : out) v /= static_cast<double>(m);
    auto px = x.node();
    return make_op({d}, std::move(out), {px}, [px, m, d](Node& n) {
        if (!wants(px)) return;
        double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) px->grad[i * d + j] += n.grad[j] * inv;
    });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    check(x.shape().size() == 2, "layer_norm: expects a matrix");
    std::size_t m = x.rows(), d = x.cols();
    check(gain.size() == d && bias.size() == d, "layer_norm: gain/bias dimension mismatch");

    std::vector<double> out(m * d);
    auto normalized = std::make_shared<std::vector<double>>(m * d);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += x.values()[i * d + j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double c = x.values()[i * d + j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        double s = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = s;
        for (std::size_t j = 0; j < d; ++j) {
            double xh = (x.values()[i * d + j] - mean) * s;
            (*normalized)[i * d + j] = xh;
            out[i * d + j] = gain.values()[j] * xh + bias.values()[j];
        }
    }

    auto px = x.node(), pg = gain.node(), pb = bias.node();
    return make_op({m, d}, std::move(out), {px, pg, pb},
                   [px, pg, pb, normalized, inv_std, m, d](Node& n) {
                       for (std::size_t i = 0; i < m; ++i) {
                           const double* g = &n.grad[i * d];
                           const double* xh = &(*normalized)[i * d];
                           if (wants(pg))
                               for (std::size_t j = 0; j < d; ++j) pg->grad[j] += g[j] * xh[j];
                           if (wants(pb))
                               for (std::size_t j = 0; j < d; ++j) pb->grad[j] += g[j];
                           if (wants(px)) {
                               double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                               for (std::size_t j = 0; j < d; ++j) {
                                   double dxh = g[j] * pg->value[j];
                                   mean_dxh += dxh;
                                   mean_dxh_xh += dxh * xh[j];
                               }
                               mean_dxh /= static_cast<double>(d);
                               mean_dxh_xh /= static_cast<double>(d);
                               double s = (*inv_std)[i];
                               for (std::size_t j = 0; j < d; ++j) {
                                   double dxh = g[j] * pg->value[j];
                                   px->grad[i * d + j] +=
                                       s * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                               }
                           }
                       }
                   });
}

Tensor bce_loss(const Tensor& probability, int y, double weight, double eps) {
    check(probability.size() == 1, "bce_loss: probability must be scalar");
    double p_raw = probability.values()[0];
    double p = std::clamp(p_raw, eps, 1.0 - eps);
    double loss = -weight * (y == 1 ? std::log(p) : std::log(1.0 - p));
    auto pp = probability.node();
    bool clamped = (p_raw < eps) || (p_raw > 1.0 - eps);
    return make_op({1}, {loss}, {pp}, [pp, y, weight, p, clamped](Node& n) {
        if (!wants(pp) || clamped) return;
        double d = (y == 1) ? -weight / p : weight / (1.0 - p);
        pp->grad[0] += n.grad[0] * d;
    });
}

Tensor mask_mul(const Tensor& a, const std::vector<double>& mask) {
    check(mask.size() == a.size(), "mask_mul: mask size mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * mask[i];
    auto pa = a.node();
    return make_op(a.shape(), std::move(out), {pa}, [pa, mask](Node& n) {
        if (!wants(pa))
            return;
        for (std::size_t i = 0; i < n.size(); ++i) acc(pa, i, n.grad[i] * mask[i]);
    });
}

}  // namespace trajgraph::nn
