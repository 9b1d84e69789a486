// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "glcanet/ops.hpp"
#include "glcanet/random.hpp"

namespace glcanet {

struct GradcheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

/// Optional tamper point applied to each input's analytic gradient before
/// comparison; lets callers verify that a broken gradient is caught.
template <class T>
using GradHook = std::function<void(std::size_t input, std::span<T> grad)>;

/// Compares reverse-mode gradients against central differences.
///
/// `f` maps the inputs to a tensor of any shape; it is reduced to a scalar by
/// a fixed random projection so every output element participates. Inputs are
/// perturbed in place and restored. The error per scalar is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
template <class T, class F>
GradcheckReport gradcheck_report(F&& f, std::vector<Tensor<T>> inputs, double epsilon, std::uint64_t seed = 7,
                                 const GradHook<T>& hook = {}) {
    if (!(epsilon > 0)) throw UsageError("gradcheck: epsilon must be positive");

    Tensor<T> probe;
    {
        NoGradGuard<T> off;
        const Tensor<T> shape_of = f(inputs);
        Rng rng(seed);
        probe = uniform_tensor<T>(shape_of.shape(), 0.5, 1.5, rng);
    }
    auto objective = [&]() { return sum(mul(f(inputs), probe)); };

    std::vector<bool> saved_flags;
    for (auto& t : inputs) {
        saved_flags.push_back(t.requires_grad());
        t.set_requires_grad(true);
        t.zero_grad();
    }
    std::vector<std::vector<T>> analytic;
    {
        GradTape<T> tape;
        tape.backward(objective());
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        analytic.push_back(inputs[i].grad());
        if (hook) hook(i, analytic.back());
    }

    GradcheckReport report;
    NoGradGuard<T> off;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto values = inputs[i].mutable_data();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const T original = values[j];
            values[j] = static_cast<T>(original + epsilon);
            const double up = objective().item();
            values[j] = static_cast<T>(original - epsilon);
            const double down = objective().item();
            values[j] = original;

            const double numeric = (up - down) / (2.0 * epsilon);
            const double a = analytic[i][j];
            const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            ++report.checked;
            if (err > report.max_relative_error || report.checked == 1) {
                report.max_relative_error = err;
                report.worst_input = i;
                report.worst_index = j;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        inputs[i].zero_grad();
        inputs[i].set_requires_grad(saved_flags[i]);
    }
    return report;
}

template <class T, class F>
double gradcheck(F&& f, std::vector<Tensor<T>> inputs, double epsilon) {
    return gradcheck_report<T>(std::forward<F>(f), std::move(inputs), epsilon).max_relative_error;
}

} // namespace glcanet
