// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glcanet/model.hpp"

namespace glcanet {

struct AdamConfig {
    double lr_global = 1e-4;
    double lr_local = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    /// Fusion and aggregation parameters share the global rate.
    double lr_for(ParamGroup g) const { return g == ParamGroup::local ? lr_local : lr_global; }
};

/// Moments for one parameter list, in the order of ModelParams::named().
template <class T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const std::vector<NamedParam<T>>& params) {
        AdamState s;
        for (const auto& p : params) {
            s.m.emplace_back(p.tensor->numel(), T(0));
            s.v.emplace_back(p.tensor->numel(), T(0));
        }
        return s;
    }
};

/// One bias-corrected Adam update using each tensor's accumulated gradient.
/// Tensors that received no gradient are treated as having gradient zero.
template <class T>
void adam_step(const std::vector<NamedParam<T>>& params, AdamState<T>& state, const AdamConfig& cfg) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw DimensionError("adam_step: optimizer state holds " + std::to_string(state.m.size())
                             + " tensors, model has " + std::to_string(params.size()));
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& w = *params[i].tensor;
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != w.numel() || v.size() != w.numel()) {
            throw DimensionError("adam_step: moment size mismatch for " + params[i].name);
        }
        const double lr = cfg.lr_for(params[i].group);
        const auto g = w.grad();
        auto x = w.mutable_data();
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * gj;
            const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / c1, vhat = vj / c2;
            x[j] = static_cast<T>(static_cast<double>(x[j]) - lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

} // namespace glcanet
