// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "glcanet/model.hpp"
#include "glcanet/optim.hpp"
#include "glcanet/synthetic.hpp"

namespace glcanet {

/// Everything a CLI run needs. Defaults are the desk-scale setup.
struct RunConfig {
    ModelConfig model;
    AdamConfig adam;
    std::size_t batch = 1;
    std::size_t steps = 500;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0; // 0: only at the end
    // synthetic data
    std::size_t image_size = 64;
    std::size_t train_images = 48;
    std::size_t val_images = 12;
    // ablation
    std::size_t ablate_seeds = 5;
    // gradient check
    double gradcheck_eps = 1e-5;
    double gradcheck_tolerance = 1e-4;
    // memory benchmark sides (second should be twice the first)
    std::size_t bench_small = 128;
    std::size_t bench_large = 256;

    DatasetSpec dataset() const {
        return {seed, model.num_classes, image_size, train_images, val_images};
    }

    void validate() const {
        model.validate();
        auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); };
        if (batch == 0) fail("batch", "must be positive");
        if (image_size == 0) fail("image_size", "must be positive");
        if (train_images == 0) fail("train_images", "must be positive");
        if (ablate_seeds == 0) fail("ablate_seeds", "must be positive");
        if (!(adam.lr_global >= 0)) fail("lr_global", "must be >= 0");
        if (!(adam.lr_local >= 0)) fail("lr_local", "must be >= 0");
        if (!(adam.beta1 >= 0 && adam.beta1 < 1)) fail("beta1", "must be in [0, 1)");
        if (!(adam.beta2 >= 0 && adam.beta2 < 1)) fail("beta2", "must be in [0, 1)");
        if (!(gradcheck_eps > 0)) fail("gradcheck_eps", "must be positive");
        if (!(gradcheck_tolerance > 0)) fail("gradcheck_tolerance", "must be positive");
        if (bench_small == 0 || bench_large == 0) fail("bench_small", "sides must be positive");
    }
};

/// The end-to-end gradient-check model: patch 8, d_model 4, 2 classes, a
/// 2x2 global token grid, on a 12x12 image (4 overlapping patches).
inline RunConfig micro_config() {
    RunConfig c;
    c.model.num_classes = 2;
    c.model.stage_channels = {4, 4};
    c.model.downsample = {true, true};
    c.model.patch = 8;
    c.model.overlap = 4;
    c.model.global_size = 8;
    c.image_size = 12;
    c.seed = 1;
    return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    in.imbue(std::locale::classic());
    double out = 0;
    in >> out;
    if (!in || !in.eof() || !std::isfinite(out)) throw ConfigError(key + ": expected a finite number, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) out.push_back(trim(item));
    return out;
}

} // namespace detail

/// Applies one key=value setting. Unknown keys are errors.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    auto u = [&] { return static_cast<std::size_t>(parse_uint(key, value)); };
    auto r = [&] { return parse_real(key, value); };
    auto b = [&] { return parse_bool(key, value); };
    if (key == "num_classes") c.model.num_classes = u();
    else if (key == "stage_channels") {
        c.model.stage_channels.clear();
        for (const auto& s : split_list(value)) c.model.stage_channels.push_back(static_cast<std::size_t>(parse_uint(key, s)));
    } else if (key == "downsample") {
        c.model.downsample.clear();
        for (const auto& s : split_list(value)) c.model.downsample.push_back(parse_bool(key, s));
    } else if (key == "patch") c.model.patch = u();
    else if (key == "overlap") c.model.overlap = u();
    else if (key == "global_size") c.model.global_size = u();
    else if (key == "use_self_attn") c.model.use_self_attn = b();
    else if (key == "use_mask") c.model.use_mask = b();
    else if (key == "lambda") c.model.lambda = r();
    else if (key == "gamma") c.model.gamma = r();
    else if (key == "lr_global") c.adam.lr_global = r();
    else if (key == "lr_local") c.adam.lr_local = r();
    else if (key == "beta1") c.adam.beta1 = r();
    else if (key == "beta2") c.adam.beta2 = r();
    else if (key == "batch") c.batch = u();
    else if (key == "steps") c.steps = u();
    else if (key == "seed") c.seed = parse_uint(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = u();
    else if (key == "image_size") c.image_size = u();
    else if (key == "train_images") c.train_images = u();
    else if (key == "val_images") c.val_images = u();
    else if (key == "ablate_seeds") c.ablate_seeds = u();
    else if (key == "gradcheck_eps") c.gradcheck_eps = r();
    else if (key == "gradcheck_tolerance") c.gradcheck_tolerance = r();
    else if (key == "bench_small") c.bench_small = u();
    else if (key == "bench_large") c.bench_large = u();
    else throw ConfigError("unknown config key '" + key + "'");
}

/// Parses `key = value` lines; '#' starts a comment. Later lines override
/// earlier ones. The result is validated.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
        }
        const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": missing key");
        if (value.empty()) throw ConfigError(key + ": missing value");
        apply_setting(base, key, value);
    }
    base.validate();
    return base;
}

inline RunConfig parse_config_string(const std::string& text, RunConfig base = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    return parse_config(in, std::move(base));
}

} // namespace glcanet
