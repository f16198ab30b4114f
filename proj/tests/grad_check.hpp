// Central finite-difference gradient checking shared by the unit and
// acceptance suites.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "trajgraph/model.hpp"
#include "trajgraph/tensor.hpp"

namespace grad_check {

struct Mismatch {
    std::string param;
    std::size_t index;
    double analytic;
    double numeric;
    double rel_error;
};

// Compares the analytic gradient of `forward` (a freshly built scalar graph
// per call) against central differences for every element of every
// parameter. Returns the worst offenders above tol.
inline std::vector<Mismatch> check_gradients(
    std::vector<trajgraph::model::NamedParam> params,
    const std::function<trajgraph::nn::Tensor()>& forward, double step = 1e-5,
    double tol = 1e-3) {
    using trajgraph::nn::Tensor;

    for (auto& p : params) p.tensor.zero_grad();
    Tensor loss = forward();
    trajgraph::nn::backward(loss);

    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(p.tensor.grad());

    std::vector<Mismatch> mismatches;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& values = params[pi].tensor.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            double saved = values[i];
            values[i] = saved + step;
            double up = forward().scalar();
            values[i] = saved - step;
            double down = forward().scalar();
            values[i] = saved;

            double numeric = (up - down) / (2.0 * step);
            double a = analytic[pi][i];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            double rel = std::abs(a - numeric) / denom;
            if (rel >= tol)
                mismatches.push_back({params[pi].name, i, a, numeric, rel});
        }
    }
    return mismatches;
}

}  // namespace grad_check
