// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "glcanet/tape.hpp"
#include "glcanet/tensor.hpp"

// Differentiable tensor operations. Every op computes its forward value
// eagerly and, when a tape is active and an input tracks gradients, records a
// closure that pushes the output gradient back into the inputs.

namespace glcanet {

namespace detail {

template <class T>
using NodeRaw = TensorNode<T>*;

inline std::string dims2(std::size_t a, std::size_t b) {
    return "[" + std::to_string(a) + "x" + std::to_string(b) + "]";
}

} // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// a[m x k] * b[k x n].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x "
                             + shape_str(b.shape()));
    }
    Tensor<T> out({m, n});
    auto A = a.data();
    auto B = b.data();
    auto C = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const T av = A[i * k + p];
            const T* brow = &B[p * n];
            T* crow = &C[i * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    if (detail::needs_record<T>({&a, &b})) {
        auto* na = a.node().get();
        auto* nb = b.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a, &b}, out, [na, nb, no, m, k, n] {
            const auto& G = no->grad;
            const auto& A = na->data;
            const auto& B = nb->data;
            if (auto ga = detail::grad_of(na); !ga.empty()) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        T acc = 0;
                        for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                        ga[i * k + p] += acc;
                    }
            }
            if (auto gb = detail::grad_of(nb); !gb.empty()) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const T av = A[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
                    }
            }
        });
    }
    return out;
}

/// a[m x k] * b[n x k]^T without materialising the transpose.
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) + " x "
                             + shape_str(b.shape()) + "^T");
    }
    Tensor<T> out({m, n});
    auto A = a.data();
    auto B = b.data();
    auto C = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
            C[i * n + j] = acc;
        }
    if (detail::needs_record<T>({&a, &b})) {
        auto* na = a.node().get();
        auto* nb = b.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a, &b}, out, [na, nb, no, m, k, n] {
            const auto& G = no->grad;
            if (auto ga = detail::grad_of(na); !ga.empty()) {
                const auto& B = nb->data;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const T g = G[i * n + j];
                        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * B[j * k + p];
                    }
            }
            if (auto gb = detail::grad_of(nb); !gb.empty()) {
                const auto& A = na->data;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const T g = G[i * n + j];
                        for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += g * A[i * k + p];
                    }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor<T> out({n, m});
    auto A = a.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) O[j * m + i] = A[i * n + j];
    if (detail::needs_record<T>({&a})) {
        auto* na = a.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a}, out, [na, no, m, n] {
            auto ga = detail::grad_of(na);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += no->grad[j * m + i];
        });
    }
    return out;
}

/// Same values, new shape (copy).
template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: " + shape_str(a.shape()) + " has " + std::to_string(a.numel())
                             + " elements, target " + shape_str(shape) + " does not");
    }
    Tensor<T> out(std::move(shape), a.data());
    if (detail::needs_record<T>({&a})) {
        auto* na = a.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a}, out, [na, no] {
            auto ga = detail::grad_of(na);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += no->grad[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail {

template <class T, class Fwd, class Bwd>
Tensor<T> binary_elementwise(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd, Bwd bwd) {
    require_same_shape(a, b, name);
    Tensor<T> out(a.shape());
    auto A = a.data();
    auto B = b.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < O.size(); ++i) O[i] = fwd(A[i], B[i]);
    if (needs_record<T>({&a, &b})) {
        auto* na = a.node().get();
        auto* nb = b.node().get();
        auto* no = out.node().get();
        record<T>({&a, &b}, out, [na, nb, no, bwd] {
            auto ga = grad_of(na);
            auto gb = grad_of(nb);
            for (std::size_t i = 0; i < no->grad.size(); ++i) {
                const auto [da, db] = bwd(na->data[i], nb->data[i], no->grad[i]);
                if (!ga.empty()) ga[i] += da;
                if (!gb.empty()) gb[i] += db;
            }
        });
    }
    return out;
}

} // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T g) { return std::pair<T, T>{g, g}; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T g) { return std::pair<T, T>{g, -g}; });
}

/// Hadamard product.
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        a, b, "mul", [](T x, T y) { return x * y; }, [](T x, T y, T g) { return std::pair<T, T>{g * y, g * x}; });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    auto A = a.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < O.size(); ++i) O[i] = A[i] * s;
    if (detail::needs_record<T>({&a})) {
        auto* na = a.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a}, out, [na, no, s] {
            auto ga = detail::grad_of(na);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += no->grad[i] * s;
        });
    }
    return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    auto A = a.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < O.size(); ++i) O[i] = A[i] > T(0) ? A[i] : T(0);
    if (detail::needs_record<T>({&a})) {
        auto* na = a.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a}, out, [na, no] {
            auto ga = detail::grad_of(na);
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (na->data[i] > T(0)) ga[i] += no->grad[i];
        });
    }
    return out;
}

/// Sum of all elements as a scalar tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    T acc = 0;
    for (T v : a.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    if (detail::needs_record<T>({&a})) {
        auto* na = a.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a}, out, [na, no] {
            auto ga = detail::grad_of(na);
            const T g = no->grad[0];
            for (auto& v : ga) v += g;
        });
    }
    return out;
}

/// Frobenius norm. The subgradient at zero is taken as zero.
template <class T>
Tensor<T> norm2(const Tensor<T>& a) {
    T acc = 0;
    for (T v : a.data()) acc += v * v;
    const T norm = std::sqrt(acc);
    Tensor<T> out = Tensor<T>::scalar(norm);
    if (detail::needs_record<T>({&a})) {
        auto* na = a.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a}, out, [na, no, norm] {
            if (norm == T(0)) return;
            auto ga = detail::grad_of(na);
            const T g = no->grad[0] / norm;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * na->data[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Softmax

/// Row-wise softmax of an [m x n] matrix, max-subtracted.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    require_rank(x, 2, "softmax_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor<T> out({m, n});
    auto X = x.data();
    auto Y = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i) {
        const T* row = &X[i * n];
        T* y = &Y[i * n];
        const T mx = *std::max_element(row, row + n);
        T total = 0;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = std::exp(row[j] - mx);
            total += y[j];
        }
        for (std::size_t j = 0; j < n; ++j) y[j] /= total;
    }
    if (detail::needs_record<T>({&x})) {
        auto* nx = x.node().get();
        auto* no = out.node().get();
        detail::record<T>({&x}, out, [nx, no, m, n] {
            auto gx = detail::grad_of(nx);
            const auto& Y = no->data;
            const auto& G = no->grad;
            for (std::size_t i = 0; i < m; ++i) {
                T dot = 0;
                for (std::size_t j = 0; j < n; ++j) dot += G[i * n + j] * Y[i * n + j];
                for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += Y[i * n + j] * (G[i * n + j] - dot);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Image-shaped ops on [C x H x W]

/// Cross-correlation with zero padding (no kernel flip).
/// x[C x H x W], kernel[O x C x kh x kw] -> [O x (H + 2p - kh + 1) x (W + 2p - kw + 1)].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t padding) {
    require_rank(x, 3, "conv2d");
    require_rank(kernel, 4, "conv2d");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t O = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != C) {
        throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " expects " + std::to_string(kernel.dim(1))
                             + " input channels, input is " + shape_str(x.shape()));
    }
    if (kh > H + 2 * padding || kw > W + 2 * padding) {
        throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input "
                             + shape_str(x.shape()) + " with padding " + std::to_string(padding));
    }
    const std::size_t OH = H + 2 * padding - kh + 1, OW = W + 2 * padding - kw + 1;
    Tensor<T> out({O, OH, OW});
    auto X = x.data();
    auto K = kernel.data();
    auto Y = out.mutable_data();
    const auto pad = static_cast<std::ptrdiff_t>(padding);

    // Valid output column range [lo, hi) for kernel column offset kj.
    auto col_range = [=](std::size_t kj) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - pad;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(OW),
                                                           static_cast<std::ptrdiff_t>(W) - shift);
        return std::pair{lo, hi};
    };

    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ki = 0; ki < kh; ++ki)
                for (std::size_t kj = 0; kj < kw; ++kj) {
                    const T kv = K[((o * C + c) * kh + ki) * kw + kj];
                    const auto [lo, hi] = col_range(kj);
                    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - pad;
                    for (std::size_t r = 0; r < OH; ++r) {
                        const std::ptrdiff_t ir = static_cast<std::ptrdiff_t>(r + ki) - pad;
                        if (ir < 0 || ir >= static_cast<std::ptrdiff_t>(H)) continue;
                        const T* xrow = &X[(c * H + static_cast<std::size_t>(ir)) * W];
                        T* yrow = &Y[(o * OH + r) * OW];
                        for (std::ptrdiff_t col = lo; col < hi; ++col) yrow[col] += kv * xrow[col + shift];
                    }
                }

    if (detail::needs_record<T>({&x, &kernel})) {
        auto* nx = x.node().get();
        auto* nk = kernel.node().get();
        auto* no = out.node().get();
        detail::record<T>({&x, &kernel}, out, [=] {
            auto gx = detail::grad_of(nx);
            auto gk = detail::grad_of(nk);
            const auto& X = nx->data;
            const auto& K = nk->data;
            const auto& G = no->grad;
            for (std::size_t o = 0; o < O; ++o)
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ki = 0; ki < kh; ++ki)
                        for (std::size_t kj = 0; kj < kw; ++kj) {
                            const std::size_t kidx = ((o * C + c) * kh + ki) * kw + kj;
                            const T kv = K[kidx];
                            const auto [lo, hi] = col_range(kj);
                            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - pad;
                            T kacc = 0;
                            for (std::size_t r = 0; r < OH; ++r) {
                                const std::ptrdiff_t ir = static_cast<std::ptrdiff_t>(r + ki) - pad;
                                if (ir < 0 || ir >= static_cast<std::ptrdiff_t>(H)) continue;
                                const std::size_t xbase = (c * H + static_cast<std::size_t>(ir)) * W;
                                const T* grow = &G[(o * OH + r) * OW];
                                for (std::ptrdiff_t col = lo; col < hi; ++col) {
                                    kacc += grow[col] * X[xbase + static_cast<std::size_t>(col + shift)];
                                }
                                if (!gx.empty()) {
                                    T* gxrow = &gx[xbase];
                                    for (std::ptrdiff_t col = lo; col < hi; ++col) gxrow[col + shift] += kv * grow[col];
                                }
                            }
                            if (!gk.empty()) gk[kidx] += kacc;
                        }
        });
    }
    return out;
}

/// Adds bias[c] to every pixel of channel c.
template <class T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    require_rank(x, 3, "add_channel_bias");
    if (bias.rank() != 1 || bias.dim(0) != x.dim(0)) {
        throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) + " does not match "
                             + shape_str(x.shape()));
    }
    const std::size_t C = x.dim(0), plane = x.dim(1) * x.dim(2);
    Tensor<T> out(x.shape());
    auto X = x.data();
    auto B = bias.data();
    auto O = out.mutable_data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) O[c * plane + i] = X[c * plane + i] + B[c];
    if (detail::needs_record<T>({&x, &bias})) {
        auto* nx = x.node().get();
        auto* nb = bias.node().get();
        auto* no = out.node().get();
        detail::record<T>({&x, &bias}, out, [nx, nb, no, C, plane] {
            auto gx = detail::grad_of(nx);
            auto gb = detail::grad_of(nb);
            for (std::size_t c = 0; c < C; ++c) {
                T acc = 0;
                for (std::size_t i = 0; i < plane; ++i) {
                    const T g = no->grad[c * plane + i];
                    acc += g;
                    if (!gx.empty()) gx[c * plane + i] += g;
                }
                if (!gb.empty()) gb[c] += acc;
            }
        });
    }
    return out;
}

/// Non-overlapping k x k mean pooling; trailing rows/columns that do not fill
/// a window are dropped.
template <class T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t k) {
    require_rank(x, 3, "avg_pool2d");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (k == 0 || H < k || W < k) {
        throw DimensionError("avg_pool2d: window " + std::to_string(k) + " does not fit " + shape_str(x.shape()));
    }
    const std::size_t OH = H / k, OW = W / k;
    const T inv = T(1) / static_cast<T>(k * k);
    Tensor<T> out({C, OH, OW});
    auto X = x.data();
    auto Y = out.mutable_data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < OH; ++r)
            for (std::size_t q = 0; q < OW; ++q) {
                T acc = 0;
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) acc += X[(c * H + r * k + i) * W + q * k + j];
                Y[(c * OH + r) * OW + q] = acc * inv;
            }
    if (detail::needs_record<T>({&x})) {
        auto* nx = x.node().get();
        auto* no = out.node().get();
        detail::record<T>({&x}, out, [=] {
            auto gx = detail::grad_of(nx);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t r = 0; r < OH; ++r)
                    for (std::size_t q = 0; q < OW; ++q) {
                        const T g = no->grad[(c * OH + r) * OW + q] * inv;
                        for (std::size_t i = 0; i < k; ++i)
                            for (std::size_t j = 0; j < k; ++j) gx[(c * H + r * k + i) * W + q * k + j] += g;
                    }
        });
    }
    return out;
}

/// Channel concatenation of [C1 x H x W] and [C2 x H x W].
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 3, "concat_channels");
    require_rank(b, 3, "concat_channels");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
        throw DimensionError("concat_channels: spatial mismatch " + shape_str(a.shape()) + " vs "
                             + shape_str(b.shape()));
    }
    Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    auto O = out.mutable_data();
    std::copy(a.data().begin(), a.data().end(), O.begin());
    std::copy(b.data().begin(), b.data().end(), O.begin() + static_cast<std::ptrdiff_t>(a.numel()));
    if (detail::needs_record<T>({&a, &b})) {
        auto* na = a.node().get();
        auto* nb = b.node().get();
        auto* no = out.node().get();
        detail::record<T>({&a, &b}, out, [na, nb, no] {
            const std::size_t split = na->data.size();
            if (auto ga = detail::grad_of(na); !ga.empty())
                for (std::size_t i = 0; i < split; ++i) ga[i] += no->grad[i];
            if (auto gb = detail::grad_of(nb); !gb.empty())
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += no->grad[split + i];
        });
    }
    return out;
}

/// Window [r0, r0 + h) x [c0, c0 + w) of x; positions outside x read as zero.
template <class T>
Tensor<T> crop(const Tensor<T>& x, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
    require_rank(x, 3, "crop");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor<T> out({C, h, w});
    auto X = x.data();
    auto Y = out.mutable_data();
    const std::size_t rows = r0 < H ? std::min(h, H - r0) : 0;
    const std::size_t cols = c0 < W ? std::min(w, W - c0) : 0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(&X[(c * H + r0 + r) * W + c0], cols, &Y[(c * h + r) * w]);
    if (detail::needs_record<T>({&x})) {
        auto* nx = x.node().get();
        auto* no = out.node().get();
        detail::record<T>({&x}, out, [=] {
            auto gx = detail::grad_of(nx);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t q = 0; q < cols; ++q) gx[(c * H + r0 + r) * W + c0 + q] += no->grad[(c * h + r) * w + q];
        });
    }
    return out;
}

namespace detail {

/// Source sampling position for one output coordinate under half-pixel
/// alignment: index pair and fractional weight of the upper neighbour.
struct BilinearTap {
    std::size_t lo, hi;
    double frac;
};

inline BilinearTap bilinear_tap(std::size_t dst, std::size_t src_extent, std::size_t dst_extent) {
    const double ratio = static_cast<double>(src_extent) / static_cast<double>(dst_extent);
    double s = (static_cast<double>(dst) + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_extent - 1));
    const auto lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, src_extent - 1);
    return {lo, hi, s - static_cast<double>(lo)};
}

} // namespace detail

/// Window of the bilinear resize of x to [full_h x full_w], covering rows
/// [r0, r0 + h) and columns [c0, c0 + w). Equal to crop(bilinear_resize(x,
/// full_h, full_w), ...) without materialising the full-size map.
template <class T>
Tensor<T> bilinear_resize_window(const Tensor<T>& x, std::size_t full_h, std::size_t full_w, std::size_t r0,
                                 std::size_t c0, std::size_t h, std::size_t w) {
    require_rank(x, 3, "bilinear_resize");
    if (full_h == 0 || full_w == 0 || h == 0 || w == 0) {
        throw DimensionError("bilinear_resize: target extents must be positive");
    }
    if (r0 + h > full_h || c0 + w > full_w) {
        throw DimensionError("bilinear_resize: window exceeds target " + detail::dims2(full_h, full_w));
    }
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    std::vector<detail::BilinearTap> ty(h), tx(w);
    for (std::size_t r = 0; r < h; ++r) ty[r] = detail::bilinear_tap(r0 + r, H, full_h);
    for (std::size_t q = 0; q < w; ++q) tx[q] = detail::bilinear_tap(c0 + q, W, full_w);

    Tensor<T> out({C, h, w});
    auto X = x.data();
    auto Y = out.mutable_data();
    for (std::size_t c = 0; c < C; ++c) {
        const T* plane = &X[c * H * W];
        for (std::size_t r = 0; r < h; ++r) {
            const auto& vy = ty[r];
            const T fy = static_cast<T>(vy.frac);
            for (std::size_t q = 0; q < w; ++q) {
                const auto& vx = tx[q];
                const T fx = static_cast<T>(vx.frac);
                const T a = plane[vy.lo * W + vx.lo], b = plane[vy.lo * W + vx.hi];
                const T d = plane[vy.hi * W + vx.lo], e = plane[vy.hi * W + vx.hi];
                // Lerp form keeps constant inputs exact.
                const T top = a + fx * (b - a);
                const T bottom = d + fx * (e - d);
                Y[(c * h + r) * w + q] = top + fy * (bottom - top);
            }
        }
    }
    if (detail::needs_record<T>({&x})) {
        auto* nx = x.node().get();
        auto* no = out.node().get();
        detail::record<T>({&x}, out, [=, ty = std::move(ty), tx = std::move(tx)] {
            auto gx = detail::grad_of(nx);
            for (std::size_t c = 0; c < C; ++c) {
                T* plane = &gx[c * H * W];
                for (std::size_t r = 0; r < h; ++r) {
                    const auto& vy = ty[r];
                    const T fy = static_cast<T>(vy.frac);
                    for (std::size_t q = 0; q < w; ++q) {
                        const auto& vx = tx[q];
                        const T fx = static_cast<T>(vx.frac);
                        const T g = no->grad[(c * h + r) * w + q];
                        plane[vy.lo * W + vx.lo] += g * (1 - fy) * (1 - fx);
                        plane[vy.lo * W + vx.hi] += g * (1 - fy) * fx;
                        plane[vy.hi * W + vx.lo] += g * fy * (1 - fx);
                        plane[vy.hi * W + vx.hi] += g * fy * fx;
                    }
                }
            }
        });
    }
    return out;
}

/// Bilinear resize with half-pixel centres and edge clamping.
template <class T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t target_h, std::size_t target_w) {
    return bilinear_resize_window(x, target_h, target_w, 0, 0, target_h, target_w);
}

// ---------------------------------------------------------------------------
// Losses

/// Label value excluded from losses and metrics.
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Mean over labelled pixels of -(1 - p_t)^gamma * log(p_t), where p_t is the
/// softmax probability of the true class. logits: [K x h x w]; targets: h*w
/// class indices (kIgnoreLabel skipped). The log argument is clamped at 1e-12.
template <class T>
Tensor<T> focal_loss(const Tensor<T>& logits, std::span<const std::uint8_t> targets, double gamma) {
    require_rank(logits, 3, "focal_loss");
    if (gamma < 0) throw UsageError("focal_loss: gamma must be >= 0");
    const std::size_t K = logits.dim(0), plane = logits.dim(1) * logits.dim(2);
    if (targets.size() != plane) {
        throw DimensionError("focal_loss: " + std::to_string(targets.size()) + " targets for logits "
                             + shape_str(logits.shape()));
    }
    constexpr double kFloor = 1e-12;
    auto L = logits.data();
    std::vector<double> probs(K * plane);
    std::size_t counted = 0;
    double total = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        const std::uint8_t t = targets[i];
        if (t == kIgnoreLabel) continue;
        if (t >= K) {
            throw DataError("focal_loss: target " + std::to_string(t) + " outside [0, " + std::to_string(K) + ")");
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(L[k * plane + i]));
        double z = 0;
        for (std::size_t k = 0; k < K; ++k) {
            probs[k * plane + i] = std::exp(static_cast<double>(L[k * plane + i]) - mx);
            z += probs[k * plane + i];
        }
        for (std::size_t k = 0; k < K; ++k) probs[k * plane + i] /= z;
        const double pt = probs[t * plane + i];
        total += -std::pow(1.0 - pt, gamma) * std::log(std::max(pt, kFloor));
        ++counted;
    }
    const double denom = counted ? static_cast<double>(counted) : 1.0;
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / denom));
    if (detail::needs_record<T>({&logits})) {
        auto* nl = logits.node().get();
        auto* no = out.node().get();
        std::vector<std::uint8_t> tgt(targets.begin(), targets.end());
        detail::record<T>({&logits}, out, [=, probs = std::move(probs), tgt = std::move(tgt)] {
            auto gl = detail::grad_of(nl);
            const double g = static_cast<double>(no->grad[0]) / denom;
            for (std::size_t i = 0; i < plane; ++i) {
                const std::uint8_t t = tgt[i];
                if (t == kIgnoreLabel) continue;
                const double pt = probs[t * plane + i];
                const double q = 1.0 - pt;
                // d loss / d p_t
                double dp = -std::pow(q, gamma) / pt;
                if (pt < kFloor) dp = 0.0;
                if (gamma > 0 && q > 0) dp += gamma * std::pow(q, gamma - 1.0) * std::log(std::max(pt, kFloor));
                for (std::size_t k = 0; k < K; ++k) {
                    const double dpt_dz = pt * ((k == t ? 1.0 : 0.0) - probs[k * plane + i]);
                    gl[k * plane + i] += static_cast<T>(g * dp * dpt_dz);
                }
            }
        });
    }
    return out;
}

} // namespace glcanet
