// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "glcanet/ops.hpp"

namespace glcanet {

struct TileOrigin {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const TileOrigin&) const = default;
};

/// Overlapping square patch layout over one image. Axes shorter than the
/// patch are zero-padded up to it (padded_h / padded_w record that).
struct TileGrid {
    std::size_t image_h = 0, image_w = 0;
    std::size_t padded_h = 0, padded_w = 0;
    std::size_t patch = 0, overlap = 0;
    std::vector<TileOrigin> origins; // row-major

    std::size_t size() const noexcept { return origins.size(); }
    std::size_t stride() const noexcept { return patch - overlap; }
    bool operator==(const TileGrid&) const = default;
};

/// Origins along one axis: 0, stride, 2 * stride, ... while the patch stays
/// inside the extent, then one final origin clamped to extent - patch.
inline std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t patch, std::size_t stride) {
    if (extent <= patch) return {0};
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o + patch < extent; o += stride) out.push_back(o);
    const std::size_t last = extent - patch;
    if (out.empty() || out.back() != last) out.push_back(last);
    return out;
}

inline TileGrid plan_grid(std::size_t image_h, std::size_t image_w, std::size_t patch, std::size_t overlap) {
    if (patch == 0) throw ConfigError("plan_grid: patch must be positive");
    if (overlap >= patch) {
        throw ConfigError("plan_grid: overlap " + std::to_string(overlap) + " must be smaller than patch "
                          + std::to_string(patch));
    }
    if (image_h == 0 || image_w == 0) throw ConfigError("plan_grid: image extents must be positive");
    TileGrid grid;
    grid.image_h = image_h;
    grid.image_w = image_w;
    grid.padded_h = std::max(image_h, patch);
    grid.padded_w = std::max(image_w, patch);
    grid.patch = patch;
    grid.overlap = overlap;
    const auto rows = axis_origins(image_h, patch, patch - overlap);
    const auto cols = axis_origins(image_w, patch, patch - overlap);
    for (std::size_t r : rows)
        for (std::size_t c : cols) grid.origins.push_back({r, c});
    return grid;
}

/// Number of patches covering each image pixel (row-major, image_h x image_w).
inline std::vector<std::uint32_t> coverage(const TileGrid& grid) {
    std::vector<std::uint32_t> count(grid.image_h * grid.image_w, 0);
    for (const auto& o : grid.origins) {
        const std::size_t r1 = std::min(o.row + grid.patch, grid.image_h);
        const std::size_t c1 = std::min(o.col + grid.patch, grid.image_w);
        for (std::size_t r = o.row; r < r1; ++r)
            for (std::size_t c = o.col; c < c1; ++c) ++count[r * grid.image_w + c];
    }
    return count;
}

inline void check_patch_index(const TileGrid& grid, std::size_t i) {
    if (i >= grid.size()) {
        throw UsageError("patch index " + std::to_string(i) + " out of range for grid of " + std::to_string(grid.size()));
    }
}

/// Pixel copy of patch i from a [C x H x W] image; zero where the patch runs
/// past a padded axis.
template <class T>
Tensor<T> extract_patch(const Tensor<T>& image, const TileGrid& grid, std::size_t i) {
    check_patch_index(grid, i);
    require_rank(image, 3, "extract_patch");
    if (image.dim(1) != grid.image_h || image.dim(2) != grid.image_w) {
        throw DimensionError("extract_patch: image " + shape_str(image.shape()) + " does not match grid "
                             + std::to_string(grid.image_h) + "x" + std::to_string(grid.image_w));
    }
    const auto& o = grid.origins[i];
    return crop(image, o.row, o.col, grid.patch, grid.patch);
}

/// Label crop of patch i; padding reads as kIgnoreLabel.
inline std::vector<std::uint8_t> extract_label_patch(std::span<const std::uint8_t> labels, const TileGrid& grid,
                                                     std::size_t i) {
    check_patch_index(grid, i);
    const auto& o = grid.origins[i];
    std::vector<std::uint8_t> out(grid.patch * grid.patch, kIgnoreLabel);
    for (std::size_t r = 0; r < grid.patch && o.row + r < grid.image_h; ++r)
        for (std::size_t c = 0; c < grid.patch && o.col + c < grid.image_w; ++c)
            out[r * grid.patch + c] = labels[(o.row + r) * grid.image_w + o.col + c];
    return out;
}

/// Reassembles per-patch maps [C x patch x patch] into [C x H x W] by
/// averaging every pixel over the patches that cover it. Differentiable.
template <class T>
Tensor<T> stitch(const std::vector<Tensor<T>>& patches, const TileGrid& grid) {
    if (patches.size() != grid.size()) {
        throw DimensionError("stitch: " + std::to_string(patches.size()) + " patch outputs for a grid of "
                             + std::to_string(grid.size()));
    }
    const std::size_t P = grid.patch, H = grid.image_h, W = grid.image_w;
    const std::size_t C = patches.front().dim(0);
    for (const auto& p : patches) {
        if (p.shape() != Shape{C, P, P}) {
            throw DimensionError("stitch: patch output " + shape_str(p.shape()) + " expected "
                                 + shape_str(Shape{C, P, P}));
        }
    }
    const auto count = coverage(grid);
    // Running mean, so identical overlapping copies reproduce their value exactly.
    Tensor<T> out({C, H, W});
    auto Y = out.mutable_data();
    std::vector<std::uint32_t> seen(H * W, 0);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto& o = grid.origins[i];
        auto X = patches[i].data();
        for (std::size_t r = 0; r < P && o.row + r < H; ++r)
            for (std::size_t q = 0; q < P && o.col + q < W; ++q) {
                const std::size_t p = (o.row + r) * W + o.col + q;
                const T n = static_cast<T>(++seen[p]);
                for (std::size_t c = 0; c < C; ++c) {
                    T& y = Y[c * H * W + p];
                    y += (X[(c * P + r) * P + q] - y) / n;
                }
            }
    }

    bool track = false;
    if (GradTape<T>::active() != nullptr)
        for (const auto& p : patches) track = track || p.requires_grad();
    if (track) {
        std::vector<const Tensor<T>*> inputs;
        std::vector<detail::TensorNode<T>*> nodes;
        for (const auto& p : patches) {
            inputs.push_back(&p);
            nodes.push_back(p.node().get());
        }
        auto* no = out.node().get();
        detail::record<T>(inputs, out, [=, nodes = std::move(nodes), count = std::move(count)] {
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                auto g = detail::grad_of(nodes[i]);
                if (g.empty()) continue;
                const auto& o = grid.origins[i];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t r = 0; r < P && o.row + r < H; ++r)
                        for (std::size_t q = 0; q < P && o.col + q < W; ++q) {
                            const std::size_t p = (o.row + r) * W + o.col + q;
                            g[(c * P + r) * P + q] += no->grad[c * H * W + p] / static_cast<T>(count[p]);
                        }
            }
        });
    }
    return out;
}

/// Streaming counterpart of stitch() for inference: holds one [C x H x W]
/// running mean and a coverage count, and accepts patches one at a time.
template <class T>
class StitchAccumulator {
public:
    StitchAccumulator(std::size_t channels, const TileGrid& grid)
        : grid_(grid), mean_({channels, grid.image_h, grid.image_w}), count_(grid.image_h * grid.image_w, 0) {}

    void add(std::size_t i, const Tensor<T>& patch) {
        check_patch_index(grid_, i);
        const std::size_t C = mean_.dim(0), P = grid_.patch, H = grid_.image_h, W = grid_.image_w;
        if (patch.shape() != Shape{C, P, P}) {
            throw DimensionError("StitchAccumulator: patch " + shape_str(patch.shape()) + " expected "
                                 + shape_str(Shape{C, P, P}));
        }
        const auto& o = grid_.origins[i];
        auto S = mean_.mutable_data();
        auto X = patch.data();
        for (std::size_t r = 0; r < P && o.row + r < H; ++r)
            for (std::size_t q = 0; q < P && o.col + q < W; ++q) {
                const std::size_t p = (o.row + r) * W + o.col + q;
                const T n = static_cast<T>(++count_[p]);
                for (std::size_t c = 0; c < C; ++c) {
                    T& y = S[c * H * W + p];
                    y += (X[(c * P + r) * P + q] - y) / n;
                }
            }
    }

    /// The averaged map; every pixel must have been covered.
    Tensor<T> finish() const {
        for (auto n : count_)
            if (n == 0) throw UsageError("StitchAccumulator: pixel left uncovered");
        return mean_;
    }

private:
    TileGrid grid_;
    Tensor<T> mean_;
    std::vector<std::uint32_t> count_;
};

/// Global-branch input: the whole image resized to target x target.
template <class T>
Tensor<T> downsample_global(const Tensor<T>& image, std::size_t target) {
    if (target == 0) throw DimensionError("downsample_global: target must be positive");
    return bilinear_resize(image, target, target);
}

inline nlohmann::json grid_to_json(const TileGrid& grid) {
    nlohmann::json origins = nlohmann::json::array();
    for (const auto& o : grid.origins) origins.push_back({o.row, o.col});
    return {{"image_h", grid.image_h}, {"image_w", grid.image_w}, {"patch", grid.patch},
            {"overlap", grid.overlap}, {"origins", origins}};
}

inline TileGrid grid_from_json(const nlohmann::json& j) {
    TileGrid grid = plan_grid(j.at("image_h").get<std::size_t>(), j.at("image_w").get<std::size_t>(),
                              j.at("patch").get<std::size_t>(), j.at("overlap").get<std::size_t>());
    std::vector<TileOrigin> origins;
    for (const auto& o : j.at("origins")) origins.push_back({o.at(0).get<std::size_t>(), o.at(1).get<std::size_t>()});
    if (origins != grid.origins) throw DataError("grid JSON origins disagree with its parameters");
    return grid;
}

} // namespace glcanet
