// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "glcanet/tensor.hpp"

namespace glcanet {

/// Seeded generator with platform-independent real draws (the standard
/// distributions are implementation-defined, mt19937_64 itself is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 engine_;
};

template <class T>
Tensor<T> uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.mutable_data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

/// Weight init: uniform in +-sqrt(1 / fan_in).
template <class T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    return uniform_tensor<T>(std::move(shape), -bound, bound, rng);
}

} // namespace glcanet
