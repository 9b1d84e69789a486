// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "glcanet/train.hpp"

namespace glcanet {

struct AblationVariant {
    std::string name;
    bool use_self_attn;
    bool use_mask;
};

inline const std::vector<AblationVariant>& ablation_variants() {
    static const std::vector<AblationVariant> v = {
        {"baseline", false, false}, {"mask", false, true}, {"self_attn", true, false}, {"full", true, true}};
    return v;
}

struct AblationRow {
    AblationVariant variant;
    std::vector<double> miou; // one per seed
};

struct AblationTable {
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;
};

/// Trains every flag combination once per seed (cfg.seed, cfg.seed + 1, ...)
/// on the same data and scores patch-mode mIoU on `val`.
template <class T>
AblationTable run_ablation(const RunConfig& cfg, const std::vector<Sample<T>>& train, const std::vector<Sample<T>>& val,
                           const std::function<void(const AblationVariant&, std::uint64_t, double)>& progress = {}) {
    AblationTable table;
    for (std::size_t s = 0; s < cfg.ablate_seeds; ++s) table.seeds.push_back(cfg.seed + s);
    for (const auto& v : ablation_variants()) {
        AblationRow row{v, {}};
        for (auto seed : table.seeds) {
            RunConfig run = cfg;
            run.seed = seed;
            run.model.use_self_attn = v.use_self_attn;
            run.model.use_mask = v.use_mask;
            auto state = init_training<T>(run);
            train_loop<T>(run, train, state);
            const double m = miou(evaluate(run.model, state.params, val));
            row.miou.push_back(m);
            if (progress) progress(v, seed, m);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline std::string ablation_to_csv(const AblationTable& t) {
    std::ostringstream out;
    out << "variant,use_self_attn,use_mask";
    for (auto s : t.seeds) out << ",seed_" << s;
    out << '\n';
    char buf[32];
    for (const auto& r : t.rows) {
        out << r.variant.name << ',' << (r.variant.use_self_attn ? 1 : 0) << ',' << (r.variant.use_mask ? 1 : 0);
        for (double m : r.miou) {
            std::snprintf(buf, sizeof buf, "%.17g", m);
            out << ',' << buf;
        }
        out << '\n';
    }
    return out.str();
}

inline AblationTable ablation_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    AblationTable t;
    auto fields = [](const std::string& l) {
        std::vector<std::string> f;
        std::string item;
        std::istringstream s(l);
        while (std::getline(s, item, ',')) f.push_back(item);
        return f;
    };
    if (!std::getline(in, line)) throw DataError("ablation CSV is empty");
    const auto header = fields(line);
    if (header.size() < 4 || header[0] != "variant") throw DataError("ablation CSV header malformed");
    for (std::size_t i = 3; i < header.size(); ++i) {
        if (header[i].rfind("seed_", 0) != 0) throw DataError("ablation CSV header malformed");
        t.seeds.push_back(std::stoull(header[i].substr(5)));
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = fields(line);
        if (f.size() != header.size()) throw DataError("ablation CSV row has " + std::to_string(f.size()) + " fields");
        AblationRow r{{f[0], f[1] == "1", f[2] == "1"}, {}};
        for (std::size_t i = 3; i < f.size(); ++i) r.miou.push_back(std::stod(f[i]));
        t.rows.push_back(std::move(r));
    }
    return t;
}

/// Transient inference memory of both modes at two image sides.
struct MemoryBench {
    std::size_t small_side = 0, large_side = 0;
    std::size_t patch_small = 0, patch_large = 0, global_small = 0, global_large = 0;

    double patch_growth() const { return static_cast<double>(patch_large) / static_cast<double>(patch_small); }
    double global_growth() const { return static_cast<double>(global_large) / static_cast<double>(global_small); }
    /// Patch growth below 1.25x, global growth at least 3x, patch below global at the large side.
    bool within_bounds() const {
        return patch_growth() < 1.25 && global_growth() >= 3.0 && patch_large < global_large;
    }
};

template <class T>
MemoryBench bench_memory(const RunConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto params = ModelParams<T>::init(cfg.model, rng);
    MemoryBench b;
    b.small_side = cfg.bench_small;
    b.large_side = cfg.bench_large;
    for (std::size_t side : {cfg.bench_small, cfg.bench_large}) {
        const auto image = uniform_tensor<T>({cfg.model.in_channels, side, side}, 0, 1, rng);
        const auto p = forward_infer(image, cfg.model, params, InferMode::patch).transient_peak_bytes;
        const auto g = forward_infer(image, cfg.model, params, InferMode::global).transient_peak_bytes;
        (side == cfg.bench_small ? b.patch_small : b.patch_large) = p;
        (side == cfg.bench_small ? b.global_small : b.global_large) = g;
    }
    return b;
}

} // namespace glcanet
