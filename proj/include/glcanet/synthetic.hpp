// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glcanet/netpbm.hpp"
#include "glcanet/random.hpp"

namespace glcanet {

// Scene grammar: class 0 is a smooth, noisy background. Odd classes are small
// rectangles and discs; even classes are wide bands crossing the image. Class
// k carries a texture of period 2k^2 (a checker for k = 1, diagonal stripes
// otherwise), so classes differ in both fine texture and layout. Background
// also holds large, non-crossing rectangles painted with a band texture, so a
// band is told apart from them only by its extent.

enum class ShapeKind { rect, disc, band };

struct ShapeSpec {
    ShapeKind kind = ShapeKind::rect;
    std::uint8_t cls = 1;
    std::uint8_t look = 0; // class whose texture is painted; 0 means cls
    // rect: [r0, r1) x [c0, c1); disc: centre (r0, c0), radius r1;
    // band: offset r0, width r1, vertical when c0 != 0.
    int r0 = 0, c0 = 0, r1 = 0, c1 = 0;
    std::array<double, 3> color_a{}, color_b{};
};

struct SceneSpec {
    std::uint64_t seed = 0;
    std::size_t num_classes = 3;
    std::size_t height = 64, width = 64;
    std::array<double, 3> bg_from{}, bg_to{};
    double bg_angle = 0;
    std::vector<ShapeSpec> shapes; // painted in order
};

struct SyntheticScene {
    SceneSpec spec;
    Raster image;                     // RGB
    std::vector<std::uint8_t> labels; // height * width
};

inline std::size_t texture_period(std::uint8_t cls) { return 2u * cls * cls; }

namespace detail {

inline std::array<double, 3> random_color(Rng& rng) {
    return {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
}

/// Second texture colour: shifted brightness so the pattern has contrast.
inline std::array<double, 3> contrast_color(const std::array<double, 3>& a, Rng& rng) {
    const double shift = rng.uniform(0.3, 0.45);
    const double sign = (a[0] + a[1] + a[2]) / 3 > 0.5 ? -1.0 : 1.0;
    return {std::clamp(a[0] + sign * shift, 0.0, 1.0), std::clamp(a[1] + sign * shift, 0.0, 1.0),
            std::clamp(a[2] + sign * shift, 0.0, 1.0)};
}

inline ShapeSpec random_shape(std::uint8_t cls, std::size_t H, std::size_t W, Rng& rng) {
    ShapeSpec s;
    s.cls = cls;
    s.color_a = random_color(rng);
    s.color_b = contrast_color(s.color_a, rng);
    const int h = static_cast<int>(H), w = static_cast<int>(W);
    const int side = static_cast<int>(std::min(H, W));
    if (cls % 2 == 0) {
        s.kind = ShapeKind::band;
        const bool vertical = rng.below(2) == 1;
        const int extent = vertical ? w : h;
        s.r1 = std::max(2, side / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(side / 8 + 1))));
        s.r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, extent - s.r1 + 1))));
        s.c0 = vertical ? 1 : 0;
    } else {
        const int lo = std::max(2, side / 16), hi = std::max(lo + 1, side / 6);
        if (rng.below(2) == 0) {
            s.kind = ShapeKind::rect;
            const int sh = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))) * 2;
            const int sw = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))) * 2;
            s.r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, h - sh + 1))));
            s.c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, w - sw + 1))));
            s.r1 = std::min(h, s.r0 + sh);
            s.c1 = std::min(w, s.c0 + sw);
        } else {
            s.kind = ShapeKind::disc;
            s.r1 = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
            s.r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
            s.c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        }
    }
    return s;
}

/// Background rectangle textured like band class `look`, shorter than the image on both axes.
inline ShapeSpec random_decoy(std::uint8_t look, std::size_t H, std::size_t W, Rng& rng) {
    ShapeSpec s;
    s.cls = 0;
    s.look = look;
    s.color_a = random_color(rng);
    s.color_b = contrast_color(s.color_a, rng);
    const int h = static_cast<int>(H), w = static_cast<int>(W);
    const int side = static_cast<int>(std::min(H, W));
    const int lo = std::max(1, side / 5), hi = std::max(lo, side / 3);
    const int sh = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    const int sw = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    s.r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, h - sh + 1))));
    s.c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, w - sw + 1))));
    s.r1 = std::min(h, s.r0 + sh);
    s.c1 = std::min(w, s.c0 + sw);
    return s;
}

inline bool covers(const ShapeSpec& s, int r, int c) {
    switch (s.kind) {
    case ShapeKind::rect: return r >= s.r0 && r < s.r1 && c >= s.c0 && c < s.c1;
    case ShapeKind::disc: {
        const int dr = r - s.r0, dc = c - s.c0;
        return dr * dr + dc * dc <= s.r1 * s.r1;
    }
    case ShapeKind::band: {
        const int x = s.c0 != 0 ? c : r;
        return x >= s.r0 && x < s.r0 + s.r1;
    }
    }
    return false;
}

/// True where texture colour b applies at (r, c).
inline bool texture_phase(std::uint8_t cls, int r, int c) {
    const int period = static_cast<int>(texture_period(cls));
    const int half = period / 2;
    if (cls == 1) return ((r / half) + (c / half)) % 2 == 1;
    return ((r + c) % period) >= half;
}

} // namespace detail

/// Random scene layout. With `all_classes`, every class gets at least one shape.
inline SceneSpec random_scene_spec(std::uint64_t seed, std::size_t num_classes, std::size_t height, std::size_t width,
                                   bool all_classes) {
    if (num_classes == 0 || num_classes > 254) throw ConfigError("num_classes: must be in [1, 254]");
    if (height == 0 || width == 0) throw ConfigError("image_size: must be positive");
    Rng rng(seed);
    SceneSpec spec;
    spec.seed = seed;
    spec.num_classes = num_classes;
    spec.height = height;
    spec.width = width;
    spec.bg_from = detail::random_color(rng);
    spec.bg_to = detail::random_color(rng);
    spec.bg_angle = rng.uniform(0, 2 * 3.14159265358979323846);
    // Decoys, then bands, then small shapes, so smaller things stay visible.
    for (std::size_t k = 2; k < num_classes; k += 2)
        if (rng.uniform() < 0.6) spec.shapes.push_back(detail::random_decoy(static_cast<std::uint8_t>(k), height, width, rng));
    std::vector<std::uint8_t> classes;
    for (std::size_t k = 2; k < num_classes; k += 2)
        if (all_classes || rng.uniform() < 0.7) classes.push_back(static_cast<std::uint8_t>(k));
    for (std::size_t k = 1; k < num_classes; k += 2) {
        const std::size_t n = all_classes ? 1 + rng.below(3) : rng.below(4);
        for (std::size_t j = 0; j < n; ++j) classes.push_back(static_cast<std::uint8_t>(k));
    }
    for (auto k : classes) spec.shapes.push_back(detail::random_shape(k, height, width, rng));
    return spec;
}

/// Paints a scene. Noise is drawn from the spec's seed, so rendering is pure.
inline SyntheticScene render_scene(const SceneSpec& spec) {
    const std::size_t H = spec.height, W = spec.width;
    SyntheticScene out;
    out.spec = spec;
    out.image = Raster{W, H, 3, std::vector<std::uint8_t>(W * H * 3)};
    out.labels.assign(H * W, 0);
    Rng noise(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const double ca = std::cos(spec.bg_angle), sa = std::sin(spec.bg_angle);
    const double span = std::abs(ca) * static_cast<double>(H) + std::abs(sa) * static_cast<double>(W);
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
            const int ri = static_cast<int>(r), ci = static_cast<int>(c);
            double proj = (ca * (static_cast<double>(r) - H / 2.0) + sa * (static_cast<double>(c) - W / 2.0)) / span + 0.5;
            proj = std::clamp(proj, 0.0, 1.0);
            std::array<double, 3> px;
            for (int ch = 0; ch < 3; ++ch) px[ch] = spec.bg_from[ch] + proj * (spec.bg_to[ch] - spec.bg_from[ch]);
            std::uint8_t label = 0;
            for (const auto& s : spec.shapes) {
                if (!detail::covers(s, ri, ci)) continue;
                label = s.cls;
                px = detail::texture_phase(s.look != 0 ? s.look : s.cls, ri, ci) ? s.color_b : s.color_a;
            }
            out.labels[r * W + c] = label;
            for (int ch = 0; ch < 3; ++ch) {
                const double v = std::clamp(px[ch] + noise.uniform(-0.04, 0.04), 0.0, 1.0);
                out.image.pixels[(r * W + c) * 3 + ch] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return out;
}

/// Seed of scene `index` in split `split` (0 = train, 1 = val).
inline std::uint64_t scene_seed(std::uint64_t base, std::uint64_t split, std::uint64_t index) {
    // splitmix64 over a combined key
    std::uint64_t z = base * 0x100000001b3ULL + split * 0x9e3779b97f4a7c15ULL + index + 1;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct DatasetSpec {
    std::uint64_t seed = 0;
    std::size_t num_classes = 3;
    std::size_t image_size = 64;
    std::size_t train_images = 48;
    std::size_t val_images = 12;
};

inline std::string scene_stem(std::size_t index) {
    std::string s = std::to_string(index);
    return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

/// Writes <out>/train and <out>/val, each holding NNNN.ppm images and
/// NNNN.pgm label maps. The first scene of each split contains every class.
/// Split directories must not already hold images.
inline void generate_dataset(const DatasetSpec& d, const std::filesystem::path& out) {
    namespace fs = std::filesystem;
    const std::pair<const char*, std::size_t> splits[] = {{"train", d.train_images}, {"val", d.val_images}};
    for (std::size_t s = 0; s < 2; ++s) {
        const fs::path dir = out / splits[s].first;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
        // Stale scenes would be loaded alongside the new ones.
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".ppm" || e.path().extension() == ".pgm")
                throw DataError(dir.string() + " already holds images");
        for (std::size_t i = 0; i < splits[s].second; ++i) {
            const auto spec = random_scene_spec(scene_seed(d.seed, s, i), d.num_classes, d.image_size, d.image_size, i == 0);
            const auto scene = render_scene(spec);
            write_netpbm((dir / (scene_stem(i) + ".ppm")).string(), scene.image);
            write_netpbm((dir / (scene_stem(i) + ".pgm")).string(), Raster{d.image_size, d.image_size, 1, scene.labels});
        }
    }
}

} // namespace glcanet
