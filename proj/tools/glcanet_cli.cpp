// SPDX-License-Identifier: Apache-2.0
// glcanet command-line driver.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "glcanet/ablation.hpp"
#include "glcanet/train.hpp"

namespace fs = std::filesystem;
using namespace glcanet;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "key = value configuration file");
    cmd->add_option("--seed", c.seed, "overrides the config seed");
    cmd->add_flag("--deterministic", c.deterministic, "serial execution, no wall-clock fields in outputs");
}

RunConfig resolve(const Common& c, RunConfig base = {}) {
    RunConfig cfg = c.config.empty() ? base : load_config(c.config, base);
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
}

InferMode parse_mode(const std::string& m) {
    if (m == "patch") return InferMode::patch;
    if (m == "global") return InferMode::global;
    throw ConfigError("--mode: expected patch or global, got '" + m + "'");
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

int cmd_gen_data(const Common& c, const std::string& out) {
    const auto cfg = resolve(c);
    generate_dataset(cfg.dataset(), out);
    std::cout << nlohmann::json{{"out", out}, {"train", cfg.train_images}, {"val", cfg.val_images},
                                {"image_size", cfg.image_size}, {"num_classes", cfg.model.num_classes}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_train(const Common& c, const std::string& data, const std::string& out) {
    const auto cfg = resolve(c);
    const auto train = load_split<double>(fs::path(data) / "train", cfg.model.num_classes);
    ensure_dir(out);
    auto log = open_out(fs::path(out) / "train_log.jsonl");
    auto state = init_training<double>(cfg);
    auto save = [&](const fs::path& p, TrainState<double>& s) {
        save_checkpoint(p.string(), cfg.model, cfg.adam, s.params, s.optim);
    };
    train_loop<double>(cfg, train, state, [&](const StepLog& step, TrainState<double>& s) {
        log << to_json(step, !c.deterministic).dump() << '\n';
        if (cfg.checkpoint_every > 0 && step.step % cfg.checkpoint_every == 0 && step.step < cfg.steps) {
            save(fs::path(out) / ("checkpoint_step_" + std::to_string(step.step) + ".json"), s);
        }
    });
    save(fs::path(out) / "checkpoint.json", state);
    std::cout << nlohmann::json{{"steps", cfg.steps}, {"checkpoint", (fs::path(out) / "checkpoint.json").string()}}.dump()
              << '\n';
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& input, const std::string& mode_name,
              const std::string& out, bool no_overlay) {
    const auto mode = parse_mode(mode_name);
    const auto ck = load_checkpoint<double>(ckpt_path);
    std::vector<fs::path> images;
    if (fs::is_directory(input)) images = list_files(input, ".ppm");
    else images.push_back(input);
    if (images.empty()) throw DataError("no .ppm images in " + input);
    ensure_dir(out);
    for (const auto& path : images) {
        const auto raster = read_netpbm(path.string());
        const auto result = forward_infer(raster_to_tensor<double>(raster), ck.model, ck.params, mode);
        const std::string stem = path.stem().string();
        write_netpbm((fs::path(out) / (stem + ".pgm")).string(), Raster{result.width, result.height, 1, result.classes});
        if (!no_overlay) write_netpbm((fs::path(out) / (stem + "_overlay.ppm")).string(), overlay(raster, result.classes));
        std::cout << nlohmann::json{{"image", stem},
                                    {"mode", to_string(mode)},
                                    {"tiles", result.tiles},
                                    {"transient_peak_bytes", result.transient_peak_bytes}}
                         .dump()
                  << '\n';
    }
    return 0;
}

int cmd_eval(const Common& c, const std::string& pred, const std::string& gt, const std::string& out) {
    const auto cfg = resolve(c);
    ConfusionMatrix total(cfg.model.num_classes);
    std::optional<std::ofstream> file;
    if (!out.empty()) {
        ensure_dir(out);
        file = open_out(fs::path(out) / "metrics.jsonl");
    }
    auto emit = [&](const nlohmann::json& j) {
        std::cout << j.dump() << '\n';
        if (file) *file << j.dump() << '\n';
    };
    std::size_t n = 0;
    for (const auto& g : list_files(gt, ".pgm")) {
        const auto p = fs::path(pred) / g.filename();
        if (!fs::exists(p)) throw DataError("no prediction for " + g.filename().string());
        const auto gr = read_netpbm(g.string());
        const auto labels = load_labels(p.string(), gr.height, gr.width);
        ConfusionMatrix cm(cfg.model.num_classes);
        cm.accumulate(labels, gr.pixels);
        total.merge(cm);
        emit(metrics_json(g.stem().string(), cm));
        ++n;
    }
    if (n == 0) throw DataError("no ground-truth .pgm files in " + gt);
    emit(metrics_json("summary", total));
    return 0;
}

int cmd_gradcheck(const Common& c, bool corrupt) {
    const auto cfg = resolve(c, micro_config());
    GradHook<double> hook;
    if (corrupt) {
        // Test hook: perturb one analytic gradient entry of the first tensor.
        hook = [](std::size_t input, std::span<double> g) {
            if (input == 0 && !g.empty()) g[0] = g[0] * 1.5 + 1e-3;
        };
    }
    const auto r = gradcheck_model(cfg, hook);
    std::cout << nlohmann::json{{"max_relative_error", r.report.max_relative_error},
                                {"worst_param", r.worst_param},
                                {"worst_index", r.report.worst_index},
                                {"analytic", r.report.worst_analytic},
                                {"numeric", r.report.worst_numeric},
                                {"checked", r.report.checked},
                                {"tolerance", cfg.gradcheck_tolerance},
                                {"pass", r.passed}}
                     .dump()
              << '\n';
    if (!r.passed) throw CheckFailure("gradient check failed");
    return 0;
}

int cmd_ablate(const Common& c, const std::string& data, const std::string& out) {
    const auto cfg = resolve(c);
    const auto train = load_split<double>(fs::path(data) / "train", cfg.model.num_classes);
    const auto val = load_split<double>(fs::path(data) / "val", cfg.model.num_classes);
    const auto table = run_ablation<double>(cfg, train, val, [](const AblationVariant& v, std::uint64_t seed, double m) {
        std::cerr << v.name << " seed " << seed << " miou " << m << '\n';
    });
    const auto csv = ablation_to_csv(table);
    if (!out.empty()) {
        ensure_dir(out);
        open_out(fs::path(out) / "ablation.csv") << csv;
    }
    std::cout << csv;
    return 0;
}

int cmd_tile(const Common& c, bool plan, std::size_t height, std::size_t width) {
    if (!plan) throw ConfigError("tile: only --plan is supported");
    const auto cfg = resolve(c);
    if (height == 0 || width == 0) throw ConfigError("tile: --height and --width must be positive");
    std::cout << grid_to_json(plan_grid(height, width, cfg.model.patch, cfg.model.overlap)).dump() << '\n';
    return 0;
}

int cmd_bench_memory(const Common& c, const std::string& out) {
    const auto cfg = resolve(c);
    const auto b = bench_memory<double>(cfg);
    const nlohmann::json j = {{"small_side", b.small_side},
                              {"large_side", b.large_side},
                              {"patch_small_bytes", b.patch_small},
                              {"patch_large_bytes", b.patch_large},
                              {"global_small_bytes", b.global_small},
                              {"global_large_bytes", b.global_large},
                              {"patch_growth", b.patch_growth()},
                              {"global_growth", b.global_growth()},
                              {"within_bounds", b.within_bounds()}};
    if (!out.empty()) {
        ensure_dir(out);
        open_out(fs::path(out) / "bench_memory.json") << j.dump() << '\n';
    }
    std::cout << j.dump() << '\n';
    if (!b.within_bounds()) throw CheckFailure("memory scaling outside bounds");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"glcanet: dual-branch segmentation toolkit"};
    app.require_subcommand(1);

    Common common;
    std::string out, data, ckpt, input, pred, gt, mode = "patch";
    bool corrupt = false, plan = false, no_overlay = false;
    std::size_t height = 0, width = 0;

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
    add_common(gen, common);
    gen->add_option("--out", out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, common);
    train->add_option("--data", data, "dataset directory (with train/)")->required();
    train->add_option("--out", out, "run directory")->required();

    auto* infer = app.add_subcommand("infer", "predict class maps");
    infer->add_option("--ckpt", ckpt, "checkpoint file")->required();
    infer->add_option("--input", input, "image file or directory of .ppm images")->required();
    infer->add_option("--mode", mode, "patch or global");
    infer->add_option("--out", out, "output directory")->required();
    infer->add_flag("--no-overlay", no_overlay, "skip the colour overlay images");

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    add_common(eval, common);
    eval->add_option("--pred", pred, "directory of predicted .pgm maps")->required();
    eval->add_option("--gt", gt, "directory of ground-truth .pgm maps")->required();
    eval->add_option("--out", out, "also write metrics.jsonl here");

    auto* grad = app.add_subcommand("gradcheck", "end-to-end finite-difference gradient check");
    add_common(grad, common);
    grad->add_flag("--corrupt-grad", corrupt, "test hook: tamper with one analytic gradient")->group("");

    auto* ablate = app.add_subcommand("ablate", "mIoU of every mechanism combination over several seeds");
    add_common(ablate, common);
    ablate->add_option("--data", data, "dataset directory (with train/ and val/)")->required();
    ablate->add_option("--out", out, "write ablation.csv here");

    auto* tile = app.add_subcommand("tile", "tile-grid planning");
    add_common(tile, common);
    tile->add_flag("--plan", plan, "print the grid as JSON");
    tile->add_option("--height", height, "image height")->required();
    tile->add_option("--width", width, "image width")->required();

    auto* bench = app.add_subcommand("bench-memory", "transient inference memory in both modes");
    add_common(bench, common);
    bench->add_option("--out", out, "write bench_memory.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_gen_data(common, out);
        if (*train) return cmd_train(common, data, out);
        if (*infer) return cmd_infer(ckpt, input, mode, out, no_overlay);
        if (*eval) return cmd_eval(common, pred, gt, out);
        if (*grad) return cmd_gradcheck(common, corrupt);
        if (*ablate) return cmd_ablate(common, data, out);
        if (*tile) return cmd_tile(common, plan, height, width);
        if (*bench) return cmd_bench_memory(common, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
