// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glcanet/ops.hpp"
#include "glcanet/random.hpp"
#include "glcanet/tiling.hpp"

namespace glcanet {

/// Learnable projections of one attention block: tokens[n x d_in] times
/// w_q / w_k [d_in x d_k] and w_v [d_in x d_v].
template <class T>
struct AttentionWeights {
    Tensor<T> w_q, w_k, w_v;

    std::size_t d_in() const { return w_q.dim(0); }
    std::size_t d_k() const { return w_q.dim(1); }
    std::size_t d_v() const { return w_v.dim(1); }

    void validate() const {
        for (const auto* w : {&w_q, &w_k, &w_v}) require_rank(*w, 2, "AttentionWeights");
        if (w_k.dim(0) != w_q.dim(0) || w_v.dim(0) != w_q.dim(0)) {
            throw DimensionError("AttentionWeights: projections disagree on input width: " + shape_str(w_q.shape())
                                 + ", " + shape_str(w_k.shape()) + ", " + shape_str(w_v.shape()));
        }
        if (w_k.dim(1) != w_q.dim(1)) {
            throw DimensionError("AttentionWeights: query and key widths differ: " + shape_str(w_q.shape()) + " vs "
                                 + shape_str(w_k.shape()));
        }
    }

    static AttentionWeights init(std::size_t d_in, std::size_t d_k, std::size_t d_v, Rng& rng) {
        return {fan_in_uniform<T>({d_in, d_k}, d_in, rng), fan_in_uniform<T>({d_in, d_k}, d_in, rng),
                fan_in_uniform<T>({d_in, d_v}, d_in, rng)};
    }
};

/// Boolean [n_q x n_k] matrix, true where a query may attend to a key.
class AttentionMask {
public:
    AttentionMask() = default;
    AttentionMask(std::size_t rows, std::size_t cols, bool value = true)
        : rows_(rows), cols_(cols), allowed_(rows * cols, value ? 1 : 0) {}

    static AttentionMask all(std::size_t rows, std::size_t cols) { return {rows, cols, true}; }

    /// Every row allows the same key set.
    static AttentionMask broadcast_row(std::size_t rows, const std::vector<std::uint8_t>& keys) {
        AttentionMask m(rows, keys.size(), false);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < keys.size(); ++j) m.set(i, j, keys[j] != 0);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool allowed(std::size_t i, std::size_t j) const { return allowed_[i * cols_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool on) { allowed_[i * cols_ + j] = on ? 1 : 0; }

    /// Throws InvalidMaskError naming the first query row with no allowed key.
    void validate() const {
        for (std::size_t i = 0; i < rows_; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < cols_ && !any; ++j) any = allowed(i, j);
            if (!any) throw InvalidMaskError("attention mask row " + std::to_string(i) + " allows no key");
        }
    }

    bool operator==(const AttentionMask&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::uint8_t> allowed_;
};

enum class TokenOrigin { global, local_patch };

/// Feature map flattened to tokens[n x d] with n = h * w (row-major pixels).
template <class T>
struct TokenSeq {
    Tensor<T> tokens;
    TokenOrigin origin = TokenOrigin::global;
    std::size_t patch_index = 0; // meaningful for local_patch
    std::size_t h = 0, w = 0;

    std::size_t size() const { return tokens.dim(0); }
    std::size_t width() const { return tokens.dim(1); }
};

/// [d x h x w] feature map -> tokens [(h*w) x d].
template <class T>
TokenSeq<T> to_tokens(const Tensor<T>& features, TokenOrigin origin, std::size_t patch_index = 0) {
    require_rank(features, 3, "to_tokens");
    const std::size_t d = features.dim(0), h = features.dim(1), w = features.dim(2);
    return {transpose(reshape(features, {d, h * w})), origin, patch_index, h, w};
}

/// Inverse of to_tokens.
template <class T>
Tensor<T> from_tokens(const TokenSeq<T>& seq) {
    if (seq.h * seq.w != seq.size()) {
        throw DimensionError("from_tokens: " + std::to_string(seq.size()) + " tokens cannot fill "
                             + std::to_string(seq.h) + "x" + std::to_string(seq.w));
    }
    return reshape(transpose(seq.tokens), {seq.width(), seq.h, seq.w});
}

template <class T>
struct Qkv {
    Tensor<T> q, k, v;
};

template <class T>
Qkv<T> project_qkv(const TokenSeq<T>& f, const AttentionWeights<T>& w) {
    w.validate();
    require_rank(f.tokens, 2, "project_qkv");
    if (f.width() != w.d_in()) {
        throw DimensionError("project_qkv: tokens " + shape_str(f.tokens.shape()) + " do not match projection "
                             + shape_str(w.w_q.shape()));
    }
    return {matmul(f.tokens, w.w_q), matmul(f.tokens, w.w_k), matmul(f.tokens, w.w_v)};
}

/// Additive mask bias: 0 where allowed, -1e9 elsewhere.
inline constexpr double kMaskedScore = -1e9;

/// softmax(Q K^T / sqrt(d_k)) with disallowed scores pushed to -1e9 first.
template <class T>
Tensor<T> attention_matrix(const Tensor<T>& q, const Tensor<T>& k, const AttentionMask* mask = nullptr) {
    require_rank(q, 2, "attention");
    require_rank(k, 2, "attention");
    if (q.dim(1) != k.dim(1)) {
        throw DimensionError("attention: query " + shape_str(q.shape()) + " and key " + shape_str(k.shape())
                             + " widths differ");
    }
    const T inv_scale = T(1) / std::sqrt(static_cast<T>(k.dim(1)));
    Tensor<T> scores = scale(matmul_nt(q, k), inv_scale);
    if (mask != nullptr) {
        if (mask->rows() != q.dim(0) || mask->cols() != k.dim(0)) {
            throw DimensionError("attention: mask [" + std::to_string(mask->rows()) + "x" + std::to_string(mask->cols())
                                 + "] does not match scores " + shape_str(scores.shape()));
        }
        mask->validate();
        Tensor<T> bias(scores.shape());
        auto B = bias.mutable_data();
        for (std::size_t i = 0; i < mask->rows(); ++i)
            for (std::size_t j = 0; j < mask->cols(); ++j)
                if (!mask->allowed(i, j)) B[i * mask->cols() + j] = static_cast<T>(kMaskedScore);
        scores = add(scores, bias);
    }
    return softmax_rows(scores);
}

/// A V with A = attention_matrix(Q, K, mask).
template <class T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const AttentionMask* mask = nullptr) {
    require_rank(v, 2, "attention");
    if (v.dim(0) != k.dim(0)) {
        throw DimensionError("attention: " + std::to_string(k.dim(0)) + " keys but value " + shape_str(v.shape()));
    }
    return matmul(attention_matrix(q, k, mask), v);
}

/// Unmasked attention of a token sequence over itself.
template <class T>
TokenSeq<T> self_attention(const TokenSeq<T>& f, const AttentionWeights<T>& w) {
    const auto p = project_qkv(f, w);
    return {scaled_dot_attention(p.q, p.k, p.v), f.origin, f.patch_index, f.h, f.w};
}

template <class T>
struct FusedPair {
    Tensor<T> global; // softmax(Q_G K_L^T / sqrt(d)) V_L + Q_G
    Tensor<T> local;  // softmax(Q_L K_G^T / sqrt(d)) V_G + Q_L
};

/// Bidirectional residual cross-attention between a global and a local
/// token set. mask_gl shapes the global->local direction ([n_g x n_l]),
/// mask_lg the local->global one ([n_l x n_g]).
template <class T>
FusedPair<T> glca_fuse(const Tensor<T>& q_g, const Tensor<T>& k_l, const Tensor<T>& v_l, const Tensor<T>& q_l,
                       const Tensor<T>& k_g, const Tensor<T>& v_g, const AttentionMask* mask_gl = nullptr,
                       const AttentionMask* mask_lg = nullptr) {
    auto residual = [](const Tensor<T>& attended, const Tensor<T>& query, const char* which) {
        if (attended.shape() != query.shape()) {
            throw DimensionError(std::string("glca_fuse: ") + which + " attention output " + shape_str(attended.shape())
                                 + " cannot take residual query " + shape_str(query.shape()));
        }
        return add(attended, query);
    };
    Tensor<T> g = residual(scaled_dot_attention(q_g, k_l, v_l, mask_gl), q_g, "global");
    Tensor<T> l = residual(scaled_dot_attention(q_l, k_g, v_g, mask_lg), q_l, "local");
    return {std::move(g), std::move(l)};
}

/// Projects both token sets with their own weights and fuses them.
template <class T>
FusedPair<T> glca_fuse_tokens(const TokenSeq<T>& global, const TokenSeq<T>& local, const AttentionWeights<T>& w_global,
                              const AttentionWeights<T>& w_local, const AttentionMask* mask_lg = nullptr) {
    const auto g = project_qkv(global, w_global);
    const auto l = project_qkv(local, w_local);
    return glca_fuse(g.q, l.k, l.v, l.q, g.k, g.v, nullptr, mask_lg);
}

/// Global cells (gh x gw over an image_h x image_w image) whose footprint
/// overlaps rows [r0, r1) and columns [c0, c1), grown by `dilation` cells in
/// every direction (Chebyshev distance).
inline std::vector<std::uint8_t> region_key_footprint(std::size_t image_h, std::size_t image_w, std::size_t r0,
                                                      std::size_t c0, std::size_t r1, std::size_t c1, std::size_t gh,
                                                      std::size_t gw, std::size_t dilation = 1) {
    if (gh == 0 || gw == 0) throw DimensionError("region_key_footprint: empty global grid");
    if (r0 >= r1 || c0 >= c1) throw DimensionError("region_key_footprint: empty region");
    // Cell a spans [a*H/gh, (a+1)*H/gh); compare in integers scaled by gh.
    auto hits = [](std::size_t a, std::size_t cells, std::size_t extent, std::size_t lo, std::size_t hi) {
        return lo * cells < (a + 1) * extent && a * extent < hi * cells;
    };
    std::vector<std::uint8_t> touched(gh * gw, 0);
    for (std::size_t a = 0; a < gh; ++a)
        for (std::size_t b = 0; b < gw; ++b)
            touched[a * gw + b] = hits(a, gh, image_h, r0, r1) && hits(b, gw, image_w, c0, c1);
    if (dilation == 0) return touched;
    std::vector<std::uint8_t> grown(gh * gw, 0);
    const auto d = static_cast<std::ptrdiff_t>(dilation);
    for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(gh); ++a)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(gw); ++b) {
            if (!touched[a * gw + b]) continue;
            for (std::ptrdiff_t da = -d; da <= d; ++da)
                for (std::ptrdiff_t db = -d; db <= d; ++db) {
                    const auto na = a + da, nb = b + db;
                    if (na < 0 || nb < 0 || na >= static_cast<std::ptrdiff_t>(gh) || nb >= static_cast<std::ptrdiff_t>(gw))
                        continue;
                    grown[na * gw + nb] = 1;
                }
        }
    return grown;
}

/// Footprint of patch i of a grid (its rectangle clipped to the image).
inline std::vector<std::uint8_t> patch_key_footprint(const TileGrid& grid, std::size_t i, std::size_t gh,
                                                     std::size_t gw, std::size_t dilation = 1) {
    check_patch_index(grid, i);
    const auto& o = grid.origins[i];
    return region_key_footprint(grid.image_h, grid.image_w, o.row, o.col, std::min(o.row + grid.patch, grid.image_h),
                                std::min(o.col + grid.patch, grid.image_w), gh, gw, dilation);
}

/// Mask restricting every query of patch i to the global cells around it.
inline AttentionMask build_patch_mask(const TileGrid& grid, std::size_t i, std::size_t gh, std::size_t gw,
                                      std::size_t n_queries) {
    return AttentionMask::broadcast_row(n_queries, patch_key_footprint(grid, i, gh, gw, 1));
}

} // namespace glcanet
