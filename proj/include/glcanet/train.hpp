// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "glcanet/checkpoint.hpp"
#include "glcanet/config.hpp"
#include "glcanet/gradcheck.hpp"
#include "glcanet/metrics.hpp"
#include "glcanet/netpbm.hpp"

namespace glcanet {

template <class T>
struct Sample {
    std::string name;
    Tensor<T> image; // [3 x H x W] in [0, 1]
    std::vector<std::uint8_t> labels;
};

template <class T>
Tensor<T> raster_to_tensor(const Raster& r) {
    if (r.channels != 3) throw DataError("expected an RGB image");
    Tensor<T> t({3, r.height, r.width});
    auto X = t.mutable_data();
    const std::size_t plane = r.height * r.width;
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) X[c * plane + i] = static_cast<T>(r.pixels[i * 3 + c]) / T(255);
    return t;
}

template <class T>
Tensor<T> load_image(const std::string& path) {
    return raster_to_tensor<T>(read_netpbm(path));
}

inline std::vector<std::uint8_t> load_labels(const std::string& path, std::size_t h, std::size_t w) {
    auto r = read_netpbm(path);
    if (r.channels != 1) throw DataError(path + ": label map must be a PGM");
    if (r.height != h || r.width != w) {
        throw DataError(path + ": label map is " + std::to_string(r.width) + "x" + std::to_string(r.height)
                        + ", image is " + std::to_string(w) + "x" + std::to_string(h));
    }
    return std::move(r.pixels);
}

/// Files with extension `ext` in `dir`, sorted by name.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& ext) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw DataError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// NNNN.ppm / NNNN.pgm pairs of one split directory.
template <class T>
std::vector<Sample<T>> load_split(const std::filesystem::path& dir, std::size_t num_classes) {
    std::vector<Sample<T>> out;
    for (const auto& img : list_files(dir, ".ppm")) {
        auto lab = img;
        lab.replace_extension(".pgm");
        if (!std::filesystem::exists(lab)) throw DataError("missing label map " + lab.string());
        Sample<T> s;
        s.name = img.stem().string();
        s.image = load_image<T>(img.string());
        s.labels = load_labels(lab.string(), s.image.dim(1), s.image.dim(2));
        check_labels(s.labels, s.labels.size(), num_classes);
        out.push_back(std::move(s));
    }
    if (out.empty()) throw DataError("no .ppm images in " + dir.string());
    return out;
}

/// Per-step record of a training run.
struct StepLog {
    std::size_t step = 0;
    LossBreakdown loss;
    double step_ms = 0;
};

inline nlohmann::json to_json(const StepLog& s, bool with_time) {
    nlohmann::json j = {{"step", s.step},
                        {"main", s.loss.main},
                        {"aux_global", s.loss.aux_global},
                        {"aux_local", s.loss.aux_local},
                        {"coupling", s.loss.coupling},
                        {"total", s.loss.total}};
    if (with_time) j["step_ms"] = s.step_ms;
    return j;
}

template <class T>
struct TrainState {
    ModelParams<T> params;
    AdamState<T> optim;
};

template <class T>
TrainState<T> init_training(const RunConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    TrainState<T> s{ModelParams<T>::init(cfg.model, rng), {}};
    s.optim = AdamState<T>::zeros_like(s.params.named());
    return s;
}

/// Runs cfg.steps optimizer steps over `data`, visiting the images in a
/// seeded shuffled order, epoch by epoch. `on_step` sees every step's losses
/// (averaged over the batch) and may save checkpoints.
template <class T>
void train_loop(const RunConfig& cfg, const std::vector<Sample<T>>& data, TrainState<T>& state,
                const std::function<void(const StepLog&, TrainState<T>&)>& on_step = {}) {
    if (data.empty()) throw DataError("training set is empty");
    Rng order(cfg.seed ^ 0x5eedULL);
    std::vector<std::size_t> perm(data.size());
    std::size_t cursor = perm.size();
    auto next = [&] {
        if (cursor == perm.size()) {
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[order.below(i)]);
            cursor = 0;
        }
        return perm[cursor++];
    };
    std::vector<TileGrid> grids;
    for (const auto& s : data) grids.push_back(plan_grid(s.image.dim(1), s.image.dim(2), cfg.model.patch, cfg.model.overlap));

    state.params.set_requires_grad(true);
    const T inv_batch = T(1) / static_cast<T>(cfg.batch);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        state.params.zero_grad();
        StepLog log;
        log.step = step;
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const std::size_t i = next();
            GradTape<T> tape;
            auto fw = forward_train(data[i].image, data[i].labels, grids[i], cfg.model, state.params);
            tape.backward(cfg.batch == 1 ? fw.total : scale(fw.total, inv_batch));
            const double w = 1.0 / static_cast<double>(cfg.batch);
            log.loss.main += w * fw.loss.main;
            log.loss.aux_global += w * fw.loss.aux_global;
            log.loss.aux_local += w * fw.loss.aux_local;
            log.loss.coupling += w * fw.loss.coupling;
            log.loss.total += w * fw.loss.total;
            log.loss.lambda = fw.loss.lambda;
        }
        adam_step(state.params.named(), state.optim, cfg.adam);
        log.step_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (on_step) on_step(log, state);
    }
    state.params.zero_grad();
    state.params.set_requires_grad(false);
}

/// Confusion matrix of `mode` predictions over a labelled split.
template <class T>
ConfusionMatrix evaluate(const ModelConfig& model, const ModelParams<T>& params, const std::vector<Sample<T>>& data,
                         InferMode mode = InferMode::patch) {
    ConfusionMatrix cm(model.num_classes);
    for (const auto& s : data) cm.accumulate(forward_infer(s.image, model, params, mode).classes, s.labels);
    return cm;
}

/// Distinct colours for prediction overlays.
inline std::array<std::uint8_t, 3> class_color(std::size_t k) {
    static constexpr std::uint8_t table[][3] = {{40, 40, 40},   {230, 25, 75},  {60, 180, 75},  {255, 225, 25},
                                                {0, 130, 200},  {245, 130, 48}, {145, 30, 180}, {70, 240, 240}};
    const auto& c = table[k % 8];
    return {c[0], c[1], c[2]};
}

/// Half-and-half blend of the image with class colours.
inline Raster overlay(const Raster& image, const std::vector<std::uint8_t>& classes) {
    Raster out = image;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto c = class_color(classes[i]);
        for (std::size_t ch = 0; ch < 3; ++ch)
            out.pixels[i * 3 + ch] = static_cast<std::uint8_t>((image.pixels[i * 3 + ch] + c[ch] + 1) / 2);
    }
    return out;
}

/// End-to-end gradient check of the total loss over every model parameter,
/// on a structured image drawn from cfg.seed.
struct ModelGradcheck {
    GradcheckReport report;
    std::string worst_param;
    bool passed = false;
};

inline ModelGradcheck gradcheck_model(const RunConfig& cfg, const GradHook<double>& hook = {}) {
    cfg.validate();
    Rng rng(cfg.seed);
    auto params = ModelParams<double>::init(cfg.model, rng);
    const std::size_t n = cfg.image_size;
    // Quadrant colours plus noise, with labels marking the diagonal quadrants.
    Tensor<double> image({cfg.model.in_channels, n, n});
    std::vector<std::vector<double>> base(4, std::vector<double>(cfg.model.in_channels));
    for (auto& q : base)
        for (auto& v : q) v = rng.uniform(0, 1);
    auto X = image.mutable_data();
    std::vector<std::uint8_t> labels(n * n);
    for (std::size_t c = 0; c < cfg.model.in_channels; ++c)
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t k = 0; k < n; ++k)
                X[(c * n + r) * n + k] = base[(r >= n / 2) * 2 + (k >= n / 2)][c] + rng.uniform(-0.2, 0.2);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < n; ++k)
            labels[r * n + k] = static_cast<std::uint8_t>(((r >= n / 2) != (k >= n / 2)) % cfg.model.num_classes);
    const auto grid = plan_grid(n, n, cfg.model.patch, cfg.model.overlap);

    ModelGradcheck out;
    out.report = gradcheck_report<double>(
        [&](const std::vector<Tensor<double>>&) { return forward_train(image, labels, grid, cfg.model, params).total; },
        params.tensors(), cfg.gradcheck_eps, 7, hook);
    out.worst_param = params.named()[out.report.worst_input].name;
    out.passed = out.report.max_relative_error < cfg.gradcheck_tolerance;
    return out;
}

} // namespace glcanet
