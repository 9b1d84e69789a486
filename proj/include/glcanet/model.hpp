// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "glcanet/attention.hpp"
#include "glcanet/ledger.hpp"
#include "glcanet/ops.hpp"
#include "glcanet/random.hpp"
#include "glcanet/tiling.hpp"

namespace glcanet {

/// Architecture and loss settings. d_model is the width of the last backbone
/// stage; both branches share the stage layout, except that the local branch
/// never pools in its last stage.
struct ModelConfig {
    std::size_t in_channels = 3;
    std::size_t num_classes = 3;
    std::vector<std::size_t> stage_channels{8, 16, 32};
    std::vector<bool> downsample{true, true, false};
    std::size_t patch = 32;
    std::size_t overlap = 8;
    std::size_t global_size = 32;
    bool use_self_attn = true;
    bool use_mask = true;
    double lambda = 0.15;
    double gamma = 6.0;

    std::size_t d_model() const { return stage_channels.back(); }

    std::vector<bool> local_downsample() const {
        auto flags = downsample;
        if (!flags.empty()) flags.back() = false;
        return flags;
    }

    static std::size_t reduced(std::size_t extent, const std::vector<bool>& flags) {
        for (bool f : flags)
            if (f) extent /= 2;
        return extent;
    }

    /// Side of the global token grid.
    std::size_t global_cells() const { return reduced(global_size, downsample); }

    /// Throws ConfigError naming the first offending key.
    void validate() const {
        auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); };
        if (in_channels == 0) fail("in_channels", "must be positive");
        if (num_classes == 0 || num_classes >= kIgnoreLabel) fail("num_classes", "must be in [1, 254]");
        if (stage_channels.empty()) fail("stage_channels", "need at least one stage");
        for (auto c : stage_channels)
            if (c == 0) fail("stage_channels", "channel counts must be positive");
        if (downsample.size() != stage_channels.size()) {
            fail("downsample", "needs one flag per stage (" + std::to_string(stage_channels.size()) + ")");
        }
        if (patch == 0) fail("patch", "must be positive");
        if (overlap >= patch) fail("overlap", "must be smaller than patch");
        if (global_size == 0) fail("global_size", "must be positive");
        // Pooling floors each axis; every stage must still have a pixel.
        auto survives = [](std::size_t extent, const std::vector<bool>& flags) {
            for (bool f : flags) {
                if (f) {
                    if (extent < 2) return false;
                    extent /= 2;
                }
            }
            return extent >= 1;
        };
        if (!survives(global_size, downsample)) fail("global_size", "too small for the configured downsampling");
        if (!survives(patch, local_downsample())) fail("patch", "too small for the configured downsampling");
        if (!(lambda >= 0) || !std::isfinite(lambda)) fail("lambda", "must be finite and >= 0");
        if (!(gamma >= 0) || !std::isfinite(gamma)) fail("gamma", "must be finite and >= 0");
    }

    bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"in_channels", c.in_channels}, {"num_classes", c.num_classes}, {"stage_channels", c.stage_channels},
            {"downsample", c.downsample},   {"patch", c.patch},             {"overlap", c.overlap},
            {"global_size", c.global_size}, {"use_self_attn", c.use_self_attn}, {"use_mask", c.use_mask},
            {"lambda", c.lambda},           {"gamma", c.gamma}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.stage_channels = j.at("stage_channels").get<std::vector<std::size_t>>();
    c.downsample = j.at("downsample").get<std::vector<bool>>();
    c.patch = j.at("patch").get<std::size_t>();
    c.overlap = j.at("overlap").get<std::size_t>();
    c.global_size = j.at("global_size").get<std::size_t>();
    c.use_self_attn = j.at("use_self_attn").get<bool>();
    c.use_mask = j.at("use_mask").get<bool>();
    c.lambda = j.at("lambda").get<double>();
    c.gamma = j.at("gamma").get<double>();
    return c;
}

enum class ParamGroup { global, local, fusion };

template <class T>
struct NamedParam {
    std::string name;
    Tensor<T>* tensor;
    ParamGroup group;
};

/// conv3x3 kernels and biases of one backbone.
template <class T>
struct BackboneWeights {
    std::vector<Tensor<T>> kernels; // [C_out x C_in x 3 x 3]
    std::vector<Tensor<T>> biases;  // [C_out]
};

template <class T>
struct ModelParams {
    BackboneWeights<T> global, local;
    AttentionWeights<T> self_global, self_local;
    AttentionWeights<T> fuse_global, fuse_local; // GLCA projections of each token stream
    Tensor<T> agg_kernel;                        // [K x 2d x 3 x 3]
    Tensor<T> agg_bias;                          // [K]
    Tensor<T> head_global, head_global_bias;     // [K x d x 1 x 1], [K]
    Tensor<T> head_local, head_local_bias;

    /// Uniform(+-sqrt(6 / fan_in)) for convolutions feeding a relu,
    /// +-sqrt(1 / fan_in) elsewhere; biases start at zero.
    static ModelParams init(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        ModelParams p;
        auto backbone = [&](BackboneWeights<T>& w) {
            std::size_t in = cfg.in_channels;
            for (std::size_t out : cfg.stage_channels) {
                const std::size_t fan_in = in * 9;
                const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
                w.kernels.push_back(uniform_tensor<T>({out, in, 3, 3}, -bound, bound, rng));
                w.biases.push_back(Tensor<T>({out}));
                in = out;
            }
        };
        const std::size_t d = cfg.d_model(), K = cfg.num_classes;
        backbone(p.global);
        backbone(p.local);
        p.self_global = AttentionWeights<T>::init(d, d, d, rng);
        p.self_local = AttentionWeights<T>::init(d, d, d, rng);
        p.fuse_global = AttentionWeights<T>::init(d, d, d, rng);
        p.fuse_local = AttentionWeights<T>::init(d, d, d, rng);
        p.agg_kernel = fan_in_uniform<T>({K, 2 * d, 3, 3}, 2 * d * 9, rng);
        p.agg_bias = Tensor<T>({K});
        p.head_global = fan_in_uniform<T>({K, d, 1, 1}, d, rng);
        p.head_global_bias = Tensor<T>({K});
        p.head_local = fan_in_uniform<T>({K, d, 1, 1}, d, rng);
        p.head_local_bias = Tensor<T>({K});
        return p;
    }

    /// Every trainable tensor in a fixed order.
    std::vector<NamedParam<T>> named() {
        std::vector<NamedParam<T>> out;
        auto backbone = [&](BackboneWeights<T>& w, const std::string& prefix, ParamGroup g) {
            for (std::size_t i = 0; i < w.kernels.size(); ++i) {
                out.push_back({prefix + ".conv" + std::to_string(i) + ".kernel", &w.kernels[i], g});
                out.push_back({prefix + ".conv" + std::to_string(i) + ".bias", &w.biases[i], g});
            }
        };
        auto attn = [&](AttentionWeights<T>& w, const std::string& prefix, ParamGroup g) {
            out.push_back({prefix + ".w_q", &w.w_q, g});
            out.push_back({prefix + ".w_k", &w.w_k, g});
            out.push_back({prefix + ".w_v", &w.w_v, g});
        };
        backbone(global, "global.backbone", ParamGroup::global);
        attn(self_global, "global.self_attn", ParamGroup::global);
        out.push_back({"global.head.kernel", &head_global, ParamGroup::global});
        out.push_back({"global.head.bias", &head_global_bias, ParamGroup::global});
        backbone(local, "local.backbone", ParamGroup::local);
        attn(self_local, "local.self_attn", ParamGroup::local);
        out.push_back({"local.head.kernel", &head_local, ParamGroup::local});
        out.push_back({"local.head.bias", &head_local_bias, ParamGroup::local});
        attn(fuse_global, "fusion.global", ParamGroup::fusion);
        attn(fuse_local, "fusion.local", ParamGroup::fusion);
        out.push_back({"fusion.agg.kernel", &agg_kernel, ParamGroup::fusion});
        out.push_back({"fusion.agg.bias", &agg_bias, ParamGroup::fusion});
        return out;
    }

    std::vector<Tensor<T>> tensors() {
        std::vector<Tensor<T>> out;
        for (auto& p : named()) out.push_back(*p.tensor);
        return out;
    }

    void set_requires_grad(bool on) {
        for (auto& p : named()) p.tensor->set_requires_grad(on);
    }

    void zero_grad() {
        for (auto& p : named()) p.tensor->zero_grad();
    }

    /// Deep copy with fresh tensor nodes.
    ModelParams clone() const {
        ModelParams copy = *this;
        for (auto& p : copy.named()) {
            const bool rg = p.tensor->requires_grad();
            *p.tensor = p.tensor->clone();
            p.tensor->set_requires_grad(rg);
        }
        return copy;
    }
};

/// Stack of conv3x3 (padding 1) + bias + relu stages, each optionally
/// followed by 2x2 mean pooling.
template <class T>
Tensor<T> backbone_forward(const Tensor<T>& x, const BackboneWeights<T>& w, const std::vector<bool>& downsample) {
    require_rank(x, 3, "backbone_forward");
    if (w.kernels.size() != downsample.size() || w.biases.size() != downsample.size()) {
        throw DimensionError("backbone_forward: " + std::to_string(w.kernels.size()) + " stages but "
                             + std::to_string(downsample.size()) + " pooling flags");
    }
    Tensor<T> h = x;
    for (std::size_t i = 0; i < w.kernels.size(); ++i) {
        h = relu(add_channel_bias(conv2d(h, w.kernels[i], 1), w.biases[i]));
        if (downsample[i]) {
            if (h.dim(1) < 2 || h.dim(2) < 2) {
                throw DimensionError("backbone_forward: stage " + std::to_string(i) + " cannot pool "
                                     + shape_str(h.shape()));
            }
            h = avg_pool2d(h, 2);
        }
    }
    return h;
}

/// Backbone features as tokens, refined by residual self-attention when enabled.
template <class T>
TokenSeq<T> branch_tokens(const Tensor<T>& x, const BackboneWeights<T>& w, const std::vector<bool>& downsample,
                          const AttentionWeights<T>& self_attn, bool use_self_attn, TokenOrigin origin,
                          std::size_t index = 0) {
    auto seq = to_tokens(backbone_forward(x, w, downsample), origin, index);
    if (use_self_attn) seq.tokens = add(seq.tokens, self_attention(seq, self_attn).tokens);
    return seq;
}

/// 1x1 convolution head.
template <class T>
Tensor<T> seg_head(const Tensor<T>& features, const Tensor<T>& kernel, const Tensor<T>& bias) {
    return add_channel_bias(conv2d(features, kernel, 0), bias);
}

/// Euclidean norm of x_loc - x_glb after resizing x_glb to x_loc's extent.
template <class T>
Tensor<T> coupling_penalty(const Tensor<T>& x_loc, const Tensor<T>& x_glb) {
    require_rank(x_loc, 3, "coupling_penalty");
    require_rank(x_glb, 3, "coupling_penalty");
    if (x_loc.dim(0) != x_glb.dim(0)) {
        throw DimensionError("coupling_penalty: channel mismatch " + shape_str(x_loc.shape()) + " vs "
                             + shape_str(x_glb.shape()));
    }
    const Tensor<T> aligned = (x_glb.dim(1) == x_loc.dim(1) && x_glb.dim(2) == x_loc.dim(2))
                                  ? x_glb
                                  : bilinear_resize(x_glb, x_loc.dim(1), x_loc.dim(2));
    return norm2(sub(x_loc, aligned));
}

/// Nearest-neighbour label resize (half-pixel centres).
inline std::vector<std::uint8_t> resize_labels_nearest(std::span<const std::uint8_t> labels, std::size_t h,
                                                       std::size_t w, std::size_t th, std::size_t tw) {
    if (labels.size() != h * w) throw DimensionError("resize_labels_nearest: label count does not match extent");
    std::vector<std::uint8_t> out(th * tw);
    for (std::size_t r = 0; r < th; ++r) {
        const std::size_t sr = std::min(h - 1, (2 * r + 1) * h / (2 * th));
        for (std::size_t c = 0; c < tw; ++c) {
            const std::size_t sc = std::min(w - 1, (2 * c + 1) * w / (2 * tw));
            out[r * tw + c] = labels[sr * w + sc];
        }
    }
    return out;
}

inline void check_labels(std::span<const std::uint8_t> labels, std::size_t expected, std::size_t num_classes) {
    if (labels.size() != expected) {
        throw DataError("label map has " + std::to_string(labels.size()) + " pixels, expected "
                        + std::to_string(expected));
    }
    for (auto v : labels) {
        if (v != kIgnoreLabel && v >= num_classes) {
            throw DataError("label " + std::to_string(v) + " outside [0, " + std::to_string(num_classes) + ")");
        }
    }
}

/// Global-branch tokens and their GLCA projections for one image.
template <class T>
struct GlobalContext {
    TokenSeq<T> tokens;
    Qkv<T> qkv;
    std::size_t cells_h = 0, cells_w = 0;
};

template <class T>
GlobalContext<T> global_context(const Tensor<T>& image, const ModelConfig& cfg, const ModelParams<T>& p) {
    auto x = downsample_global(image, cfg.global_size);
    auto seq = branch_tokens(x, p.global, cfg.downsample, p.self_global, cfg.use_self_attn, TokenOrigin::global);
    auto qkv = project_qkv(seq, p.fuse_global);
    const std::size_t gh = seq.h, gw = seq.w;
    return {std::move(seq), std::move(qkv), gh, gw};
}

/// Image rectangle handled by one local pass; [r0, r0 + h) may run past the
/// image when it is smaller than a patch.
struct TileRect {
    std::size_t r0 = 0, c0 = 0, h = 0, w = 0;
};

/// Footprint of each tile on the global grid: the dilated overlap set when
/// masking is on, every cell otherwise.
inline std::vector<std::vector<std::uint8_t>> tile_footprints(const std::vector<TileRect>& tiles, std::size_t image_h,
                                                              std::size_t image_w, std::size_t gh, std::size_t gw,
                                                              bool use_mask) {
    std::vector<std::vector<std::uint8_t>> out;
    for (const auto& t : tiles) {
        if (use_mask) {
            out.push_back(region_key_footprint(image_h, image_w, t.r0, t.c0, std::min(t.r0 + t.h, image_h),
                                               std::min(t.c0 + t.w, image_w), gh, gw, 1));
        } else {
            out.emplace_back(gh * gw, 1);
        }
    }
    return out;
}

/// Number of tile footprints containing each global cell.
inline std::vector<std::size_t> footprint_counts(const std::vector<std::vector<std::uint8_t>>& footprints) {
    std::vector<std::size_t> count(footprints.front().size(), 0);
    for (const auto& f : footprints)
        for (std::size_t j = 0; j < count.size(); ++j) count[j] += f[j];
    return count;
}

/// Weight [n_g x d] of one tile's fused global tokens in the merged global
/// map: each cell averages over the tiles whose footprint contains it.
template <class T>
Tensor<T> global_merge_weight(const std::vector<std::uint8_t>& footprint, const std::vector<std::size_t>& counts,
                              std::size_t d) {
    const std::size_t n = footprint.size();
    Tensor<T> w({n, d});
    auto W = w.mutable_data();
    for (std::size_t j = 0; j < n; ++j)
        if (footprint[j] && counts[j] > 0)
            for (std::size_t c = 0; c < d; ++c) W[j * d + c] = T(1) / static_cast<T>(counts[j]);
    return w;
}

/// One tile through the local branch and GLCA fusion.
template <class T>
struct TileFusion {
    FusedPair<T> fused;
    std::size_t local_h = 0, local_w = 0;
};

template <class T>
TileFusion<T> fuse_tile(const Tensor<T>& region, std::size_t index, const GlobalContext<T>& g,
                        const std::vector<std::uint8_t>& footprint, const ModelConfig& cfg, const ModelParams<T>& p) {
    auto seq = branch_tokens(region, p.local, cfg.local_downsample(), p.self_local, cfg.use_self_attn,
                             TokenOrigin::local_patch, index);
    const auto l = project_qkv(seq, p.fuse_local);
    const auto mask = AttentionMask::broadcast_row(seq.size(), footprint);
    auto fused = glca_fuse(g.qkv.q, l.k, l.v, l.q, g.qkv.k, g.qkv.v, nullptr, &mask);
    return {std::move(fused), seq.h, seq.w};
}

template <class T>
Tensor<T> tokens_to_map(const Tensor<T>& tokens, std::size_t h, std::size_t w) {
    return from_tokens(TokenSeq<T>{tokens, TokenOrigin::global, 0, h, w});
}

template <class T>
struct BranchOutputs {
    Tensor<T> x_glb;              // fused global features [d x gh x gw]
    std::vector<Tensor<T>> x_loc; // fused local features per patch [d x lh x lw]
    Tensor<T> s_glb;              // [K x global_size x global_size]
    std::vector<Tensor<T>> s_loc; // [K x patch x patch] per patch
    Tensor<T> s_agg;              // [K x H x W]
};

struct LossBreakdown {
    double main = 0, aux_global = 0, aux_local = 0, coupling = 0, total = 0;
    double lambda = 0;

    /// Re-sums the components in the order used to form `total`.
    double resum() const { return ((main + aux_global) + aux_local) + coupling * lambda; }
};

template <class T>
struct TrainForward {
    BranchOutputs<T> outputs;
    LossBreakdown loss;
    Tensor<T> total; // scalar on the active tape, if any
};

inline std::vector<TileRect> grid_tiles(const TileGrid& grid) {
    std::vector<TileRect> tiles;
    for (const auto& o : grid.origins) tiles.push_back({o.row, o.col, grid.patch, grid.patch});
    return tiles;
}

/// Full dual-branch pass with losses. image: [C x H x W]; labels: H*W class
/// indices (kIgnoreLabel skipped).
template <class T>
TrainForward<T> forward_train(const Tensor<T>& image, std::span<const std::uint8_t> labels, const TileGrid& grid,
                              const ModelConfig& cfg, const ModelParams<T>& p) {
    cfg.validate();
    require_rank(image, 3, "forward_train");
    const std::size_t H = image.dim(1), W = image.dim(2), P = grid.patch, K = cfg.num_classes, d = cfg.d_model();
    if (image.dim(0) != cfg.in_channels) {
        throw DimensionError("forward_train: image " + shape_str(image.shape()) + " expected "
                             + std::to_string(cfg.in_channels) + " channels");
    }
    if (grid.image_h != H || grid.image_w != W) {
        throw DimensionError("forward_train: grid planned for " + std::to_string(grid.image_h) + "x"
                             + std::to_string(grid.image_w) + " but image is " + shape_str(image.shape()));
    }
    check_labels(labels, H * W, K);

    const auto g = global_context(image, cfg, p);
    const auto tiles = grid_tiles(grid);
    const auto footprints = tile_footprints(tiles, H, W, g.cells_h, g.cells_w, cfg.use_mask);
    const auto counts = footprint_counts(footprints);

    BranchOutputs<T> out;
    Tensor<T> fused_global;
    std::vector<Tensor<T>> local_up;
    Tensor<T> aux_local_sum;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto tf = fuse_tile(extract_patch(image, grid, i), i, g, footprints[i], cfg, p);
        auto share = mul(tf.fused.global, global_merge_weight<T>(footprints[i], counts, d));
        fused_global = fused_global.defined() ? add(fused_global, share) : share;

        auto x_loc = tokens_to_map(tf.fused.local, tf.local_h, tf.local_w);
        auto s_loc = bilinear_resize(seg_head(x_loc, p.head_local, p.head_local_bias), P, P);
        const auto crop_labels = extract_label_patch(labels, grid, i);
        auto l = focal_loss(s_loc, crop_labels, cfg.gamma);
        aux_local_sum = aux_local_sum.defined() ? add(aux_local_sum, l) : l;
        local_up.push_back(bilinear_resize(x_loc, P, P));
        out.x_loc.push_back(std::move(x_loc));
        out.s_loc.push_back(std::move(s_loc));
    }
    out.x_glb = tokens_to_map(fused_global, g.cells_h, g.cells_w);

    const auto G = cfg.global_size;
    out.s_glb = bilinear_resize(seg_head(out.x_glb, p.head_global, p.head_global_bias), G, G);
    const auto global_labels = resize_labels_nearest(labels, H, W, G, G);

    const auto stitched_local = stitch(local_up, grid);
    const auto global_full = bilinear_resize(out.x_glb, H, W);
    out.s_agg = add_channel_bias(conv2d(concat_channels(global_full, stitched_local), p.agg_kernel, 1), p.agg_bias);

    const auto main = focal_loss(out.s_agg, labels, cfg.gamma);
    const auto aux_g = focal_loss(out.s_glb, global_labels, cfg.gamma);
    const auto aux_l = scale(aux_local_sum, T(1) / static_cast<T>(grid.size()));
    const auto coupling = norm2(sub(stitched_local, global_full));
    auto total = add(add(add(main, aux_g), aux_l), scale(coupling, static_cast<T>(cfg.lambda)));

    LossBreakdown lb;
    lb.main = main.item();
    lb.aux_global = aux_g.item();
    lb.aux_local = aux_l.item();
    lb.coupling = coupling.item();
    lb.lambda = static_cast<double>(static_cast<T>(cfg.lambda));
    lb.total = total.item();
    return {std::move(out), lb, std::move(total)};
}

enum class InferMode { patch, global };

inline const char* to_string(InferMode m) { return m == InferMode::patch ? "patch" : "global"; }

struct InferResult {
    std::vector<std::uint8_t> classes; // H*W, row-major
    std::size_t height = 0, width = 0;
    std::size_t tiles = 0;
    std::size_t transient_peak_bytes = 0; // tensor bytes above the input and output buffers
};

/// Lowest class index wins ties.
template <class T>
std::vector<std::uint8_t> argmax_classes(const Tensor<T>& logits) {
    require_rank(logits, 3, "argmax_classes");
    const std::size_t K = logits.dim(0), plane = logits.dim(1) * logits.dim(2);
    auto L = logits.data();
    std::vector<std::uint8_t> out(plane, 0);
    for (std::size_t i = 0; i < plane; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < K; ++k)
            if (L[k * plane + i] > L[best * plane + i]) best = k;
        out[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

namespace detail {

/// f_agg over one tile: the full-resolution global map restricted to the tile
/// rectangle, beside the tile's local features upsampled to the tile size.
template <class T>
Tensor<T> tile_logits(const Tensor<T>& x_glb, std::size_t H, std::size_t W, const Tensor<T>& x_loc,
                      const TileRect& t, const ModelParams<T>& p) {
    auto local = bilinear_resize(x_loc, t.h, t.w);
    const std::size_t vh = std::min(t.h, H - t.r0), vw = std::min(t.w, W - t.c0);
    auto global = bilinear_resize_window(x_glb, H, W, t.r0, t.c0, vh, vw);
    if (vh < t.h || vw < t.w) global = crop(global, 0, 0, t.h, t.w);
    return add_channel_bias(conv2d(concat_channels(global, local), p.agg_kernel, 1), p.agg_bias);
}

} // namespace detail

/// Class map for one image. Patch mode walks the tile grid twice (first to
/// merge the fused global tokens, then to produce and stitch per-tile
/// logits), so live memory is bounded by the tile size apart from the output.
/// Global mode runs the whole image as a single full-resolution tile.
template <class T>
InferResult forward_infer(const Tensor<T>& image, const ModelConfig& cfg, const ModelParams<T>& p, InferMode mode) {
    cfg.validate();
    require_rank(image, 3, "forward_infer");
    if (image.dim(0) != cfg.in_channels) {
        throw DimensionError("forward_infer: image " + shape_str(image.shape()) + " expected "
                             + std::to_string(cfg.in_channels) + " channels");
    }
    NoGradGuard<T> no_grad;
    const std::size_t H = image.dim(1), W = image.dim(2), K = cfg.num_classes, d = cfg.d_model();

    std::vector<TileRect> tiles;
    TileGrid grid;
    if (mode == InferMode::patch) {
        grid = plan_grid(H, W, cfg.patch, cfg.overlap);
        tiles = grid_tiles(grid);
    } else {
        tiles.push_back({0, 0, H, W});
    }
    auto region = [&](std::size_t i) { return mode == InferMode::patch ? extract_patch(image, grid, i) : image; };

    // Output buffers live outside the measured phase.
    std::optional<StitchAccumulator<T>> acc;
    Tensor<T> whole;
    if (mode == InferMode::patch) acc.emplace(K, grid);
    else whole = Tensor<T>({K, H, W});

    std::size_t transient = 0;
    {
        PhaseMeter meter;
        const auto g = global_context(image, cfg, p);
        const auto footprints = tile_footprints(tiles, H, W, g.cells_h, g.cells_w, cfg.use_mask);
        const auto counts = footprint_counts(footprints);

        Tensor<T> fused_global;
        std::optional<TileFusion<T>> only;
        for (std::size_t i = 0; i < tiles.size(); ++i) {
            auto tf = fuse_tile(region(i), i, g, footprints[i], cfg, p);
            auto share = mul(tf.fused.global, global_merge_weight<T>(footprints[i], counts, d));
            fused_global = fused_global.defined() ? add(fused_global, share) : share;
            if (tiles.size() == 1) only = std::move(tf);
        }
        const auto x_glb = tokens_to_map(fused_global, g.cells_h, g.cells_w);

        for (std::size_t i = 0; i < tiles.size(); ++i) {
            const auto tf = only ? std::move(*only) : fuse_tile(region(i), i, g, footprints[i], cfg, p);
            const auto x_loc = tokens_to_map(tf.fused.local, tf.local_h, tf.local_w);
            const auto logits = detail::tile_logits(x_glb, H, W, x_loc, tiles[i], p);
            if (acc) {
                acc->add(i, logits);
            } else {
                std::copy(logits.data().begin(), logits.data().end(), whole.mutable_data().begin());
            }
        }
        transient = meter.transient_peak();
    }
    InferResult r;
    r.classes = argmax_classes(acc ? acc->finish() : whole);
    r.height = H;
    r.width = W;
    r.tiles = tiles.size();
    r.transient_peak_bytes = transient;
    return r;
}

} // namespace glcanet
