#include "doctest.h"

#include <cmath>

#include "grad_check.hpp"
#include "trajgraph/common.hpp"
#include "trajgraph/tensor.hpp"

using namespace trajgraph;
using namespace trajgraph::nn;
using trajgraph::model::NamedParam;

TEST_CASE("forward values of the basic ops") {
    Tensor a = Tensor::from_vector({1, 2, 3});
    Tensor b = Tensor::from_vector({4, 5, 6});
    CHECK(add(a, b).values() == std::vector<double>{5, 7, 9});
    CHECK(sub(a, b).values() == std::vector<double>{-3, -3, -3});
    CHECK(mul(a, b).values() == std::vector<double>{4, 10, 18});
    CHECK(affine(a, 2.0, 1.0).values() == std::vector<double>{3, 5, 7});
    CHECK(dot(a, b).scalar() == 32.0);
    CHECK(concat(a, b).size() == 6);

    Tensor w = Tensor::from_matrix(2, 3, {1, 0, 0, 0, 1, 0});
    CHECK(matvec(w, a).values() == std::vector<double>{1, 2});

    Tensor x = Tensor::from_matrix(2, 2, {1, 2, 3, 4});
    Tensor id = Tensor::from_matrix(2, 2, {1, 0, 0, 1});
    CHECK(linear(x, id).values() == std::vector<double>{1, 2, 3, 4});

    CHECK(mean_rows(x).values() == std::vector<double>{2, 3});
    CHECK(sigmoid(Tensor::from_vector({0})).values()[0] == 0.5);
}

TEST_CASE("neighbor_mean averages neighbor rows with an empty guard") {
    Tensor x = Tensor::from_matrix(3, 2, {1, 2, 3, 4, 5, 6});
    auto out = neighbor_mean(x, {{1, 2}, {0}, {}});
    CHECK(out.values() == std::vector<double>{4, 5, 1, 2, 0, 0});
}

TEST_CASE("layer norm of a zero row is zero with unit gain") {
    Tensor x = Tensor::from_matrix(1, 4, {0, 0, 0, 0});
    Tensor gain = Tensor::from_vector({1, 1, 1, 1});
    Tensor bias = Tensor::from_vector({0, 0, 0, 0});
    auto out = layer_norm_rows(x, gain, bias);
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("bce loss values and gradient") {
    Tensor half = Tensor::from_vector({0.5});
    CHECK(bce_loss(half, 1, 1.0).scalar() == doctest::Approx(std::log(2.0)));
    Tensor near_one = Tensor::from_vector({1.0 - 1e-7});
    CHECK(bce_loss(near_one, 1, 1.0).scalar() == doctest::Approx(0.0).epsilon(1e-6));

    // dL/dp at (p=0.5, y=1, w=1) is -2, cross-checked with central differences
    Tensor p = Tensor::from_vector({0.5}, true);
    Tensor loss = bce_loss(p, 1, 1.0);
    backward(loss);
    CHECK(p.grad()[0] == doctest::Approx(-2.0));

    double step = 1e-5;
    Tensor up = Tensor::from_vector({0.5 + step});
    Tensor down = Tensor::from_vector({0.5 - step});
    double numeric = (bce_loss(up, 1, 1.0).scalar() - bce_loss(down, 1, 1.0).scalar()) /
                     (2.0 * step);
    CHECK(p.grad()[0] == doctest::Approx(numeric).epsilon(1e-6));
}

TEST_CASE("backward visits shared subgraphs once") {
    // loss = (a+a) . (a+a) = 4*a.a ; d/da = 8a
    Tensor a = Tensor::from_vector({1, 2}, true);
    Tensor s = add(a, a);
    Tensor loss = dot(s, s);
    backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(8.0));
    CHECK(a.grad()[1] == doctest::Approx(16.0));
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
    Tensor a = Tensor::from_vector({3}, true);
    backward(mul(a, a));
    backward(mul(a, a));
    CHECK(a.grad()[0] == doctest::Approx(12.0));
    a.zero_grad();
    CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("finite differences confirm every op's backward") {
    Rng rng(99);
    auto rand_vec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = rng.normal();
        return v;
    };

    Tensor w1 = Tensor::from_matrix(3, 4, rand_vec(12), true);
    Tensor w2 = Tensor::from_matrix(3, 3, rand_vec(9), true);
    Tensor gain = Tensor::from_vector(rand_vec(3), true);
    Tensor bias = Tensor::from_vector(rand_vec(3), true);
    Tensor head = Tensor::from_vector(rand_vec(3), true);
    Tensor x_const = Tensor::from_matrix(5, 4, rand_vec(20));
    std::vector<std::vector<int>> adj{{1, 2}, {0}, {3, 4, 0}, {}, {2}};

    auto forward = [&]() {
        Tensor h = linear(x_const, w1);                    // [5,3]
        Tensor m = neighbor_mean(h, adj);                  // [5,3]
        Tensor s = add(h, linear(m, w2));                  // [5,3]
        Tensor n = layer_norm_rows(s, gain, bias);         // [5,3]
        Tensor g = mean_rows(tanh_op(n));                  // [3]
        Tensor z = mul(sigmoid(g), affine(g, -1.0, 1.0));  // [3]
        Tensor p = sigmoid(dot(head, z));
        return bce_loss(p, 1, 0.7);
    };

    std::vector<NamedParam> params{{"w1", w1}, {"w2", w2}, {"gain", gain},
                                   {"bias", bias}, {"head", head}};
    auto mismatches = grad_check::check_gradients(params, forward);
    for (const auto& m : mismatches)
        MESSAGE(m.param, "[", m.index, "] analytic=", m.analytic, " numeric=", m.numeric);
    CHECK(mismatches.empty());
}

TEST_CASE("constant inputs are not dragged onto the tape") {
    Tensor c = Tensor::from_vector({1, 2});
    Tensor p = Tensor::from_vector({3, 4}, true);
    Tensor out = dot(mul(c, p), c);
    backward(out);
    CHECK(p.grad()[0] == doctest::Approx(1.0));
    CHECK(p.grad()[1] == doctest::Approx(4.0));
    CHECK_FALSE(c.requires_grad());
}
