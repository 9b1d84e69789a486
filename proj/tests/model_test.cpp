// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "glcanet/ablation.hpp"
#include "glcanet/checkpoint.hpp"
#include "glcanet/config.hpp"
#include "glcanet/train.hpp"

namespace glcanet {
namespace {

using Tensor = glcanet::Tensor<double>;

ModelConfig small_model() {
    ModelConfig c;
    c.num_classes = 3;
    c.stage_channels = {4, 4};
    c.downsample = {true, true};
    c.patch = 8;
    c.overlap = 4;
    c.global_size = 8;
    return c;
}

std::vector<std::uint8_t> random_labels(std::size_t n, std::size_t K, Rng& rng) {
    std::vector<std::uint8_t> out(n);
    for (auto& v : out) v = static_cast<std::uint8_t>(rng.below(K));
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// Sets each parameter's gradient to `g` by differentiating sum(w * g).
void set_grads(ModelParams<double>& p, double g) {
    p.set_requires_grad(true);
    p.zero_grad();
    GradTape<double> tape;
    Tensor total;
    for (auto& np : p.named()) {
        auto term = sum(mul(*np.tensor, Tensor(np.tensor->shape(), g)));
        total = total.defined() ? add(total, term) : term;
    }
    tape.backward(total);
}

// --- backbone ---------------------------------------------------------------

TEST(Backbone, IdentityKernelGivesRelu) {
    Rng rng(3);
    const std::size_t C = 3;
    BackboneWeights<double> w;
    Tensor k({C, C, 3, 3});
    for (std::size_t c = 0; c < C; ++c) k.mutable_data()[((c * C + c) * 3 + 1) * 3 + 1] = 1.0;
    w.kernels.push_back(k);
    w.biases.push_back(Tensor({C}));
    const auto x = uniform_tensor<double>({C, 5, 6}, -1, 1, rng);
    const auto y = backbone_forward(x, w, {false});
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], std::max(0.0, x.data()[i]));
}

TEST(Backbone, ZeroInputZeroOutput) {
    Rng rng(4);
    const auto p = ModelParams<double>::init(small_model(), rng);
    const auto y = backbone_forward(Tensor({3, 8, 8}), p.global, {true, true});
    EXPECT_EQ(y.shape(), (Shape{4, 2, 2}));
    for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backbone, Deterministic) {
    auto run = [] {
        Rng rng(9);
        const auto p = ModelParams<double>::init(small_model(), rng);
        const auto x = uniform_tensor<double>({3, 8, 8}, 0, 1, rng);
        const auto y = backbone_forward(x, p.local, small_model().local_downsample());
        return std::vector<double>(y.data().begin(), y.data().end());
    };
    EXPECT_EQ(run(), run());
}

TEST(Backbone, RejectsTooSmallInput) {
    Rng rng(4);
    const auto p = ModelParams<double>::init(small_model(), rng);
    EXPECT_THROW(backbone_forward(Tensor({3, 2, 2}), p.global, {true, true}), DimensionError);
}

TEST(ModelConfig, LocalBranchSkipsLastPool) {
    const auto c = small_model();
    EXPECT_EQ(c.local_downsample(), (std::vector<bool>{true, false}));
    EXPECT_EQ(c.global_cells(), 2u);
}

TEST(ModelConfig, ValidateNamesKey) {
    auto c = small_model();
    c.overlap = 8;
    try {
        c.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("overlap"), std::string::npos);
    }
    c = small_model();
    c.global_size = 3;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelParams, ShapesMatchConfig) {
    Rng rng(1);
    const auto c = small_model();
    auto p = ModelParams<double>::init(c, rng);
    EXPECT_EQ(p.agg_kernel.shape(), (Shape{3, 8, 3, 3}));
    EXPECT_EQ(p.head_global.shape(), (Shape{3, 4, 1, 1}));
    EXPECT_EQ(p.fuse_local.w_v.shape(), (Shape{4, 4}));
    for (const auto& np : p.named())
        for (double v : np.tensor->data()) EXPECT_TRUE(std::isfinite(v)) << np.name;
}

// --- coupling penalty ---------------------------------------------------------

TEST(Coupling, EqualTensorsGiveZero) {
    Rng rng(2);
    const auto x = uniform_tensor<double>({2, 4, 4}, -1, 1, rng);
    EXPECT_EQ(coupling_penalty(x, x).item(), 0.0);
}

TEST(Coupling, AllOnesDifferenceIsSqrtN) {
    const Tensor a({3, 4, 5}, 2.0), b({3, 4, 5}, 1.0);
    EXPECT_NEAR(coupling_penalty(a, b).item(), std::sqrt(60.0), 1e-12);
}

TEST(Coupling, MatchesSumOfSquares) {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = uniform_tensor<double>({2, 3, 4}, -2, 2, rng);
        const auto b = uniform_tensor<double>({2, 3, 4}, -2, 2, rng);
        double s = 0;
        for (std::size_t i = 0; i < a.numel(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        EXPECT_NEAR(coupling_penalty(a, b).item(), std::sqrt(s), 1e-12);
    }
}

TEST(Coupling, ResizesGlobalOperand) {
    // A constant global map stays constant under bilinear resizing.
    const Tensor loc({1, 6, 6}, 0.0), glb({1, 2, 2}, 1.0);
    EXPECT_NEAR(coupling_penalty(loc, glb).item(), 6.0, 1e-12);
    EXPECT_THROW(coupling_penalty(Tensor({2, 6, 6}), glb), DimensionError);
}

// --- focal loss ---------------------------------------------------------------

TEST(FocalLoss, GammaZeroIsCrossEntropy) {
    Rng rng(6);
    const std::size_t K = 4, h = 3, w = 5;
    const auto logits = uniform_tensor<double>({K, h, w}, -3, 3, rng);
    const auto t = random_labels(h * w, K, rng);
    double ce = 0;
    for (std::size_t i = 0; i < h * w; ++i) {
        double z = 0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(logits.data()[k * h * w + i]);
        ce += -(logits.data()[t[i] * h * w + i] - std::log(z));
    }
    EXPECT_NEAR(focal_loss(logits, t, 0.0).item(), ce / (h * w), 1e-12);
}

TEST(FocalLoss, SinglePixelHandValue) {
    const Tensor logits({2, 1, 1}, 0.0);
    const std::vector<std::uint8_t> t{0};
    EXPECT_NEAR(focal_loss(logits, t, 6.0).item(), std::pow(0.5, 6) * std::log(2.0), 1e-12);
}

TEST(FocalLoss, ConfidentPredictionVanishes) {
    Tensor logits({3, 1, 1});
    logits.mutable_data()[1] = 60.0;
    const std::vector<std::uint8_t> t{1};
    EXPECT_LT(focal_loss(logits, t, 6.0).item(), 1e-20);
    EXPECT_LT(focal_loss(logits, t, 0.0).item(), 1e-20);
}

TEST(FocalLoss, IgnoresMarkedPixelsAndRejectsBadTargets) {
    Tensor logits({2, 1, 2});
    const std::vector<std::uint8_t> t{0, kIgnoreLabel};
    EXPECT_NEAR(focal_loss(logits, t, 0.0).item(), std::log(2.0), 1e-12);
    const std::vector<std::uint8_t> bad{0, 2};
    EXPECT_THROW(focal_loss(logits, bad, 6.0), DataError);
}

TEST(FocalLoss, Gradcheck) {
    Rng rng(8);
    auto logits = uniform_tensor<double>({3, 2, 3}, -2, 2, rng);
    const auto t = random_labels(6, 3, rng);
    const auto r = gradcheck_report<double>([&](const std::vector<Tensor>& in) { return focal_loss(in[0], t, 6.0); },
                                            {logits}, 1e-6);
    EXPECT_LT(r.max_relative_error, 1e-5);
}

// --- Adam -----------------------------------------------------------------------

TEST(Adam, ZeroGradientIsFixedPoint) {
    Rng rng(1);
    auto p = ModelParams<double>::init(small_model(), rng);
    auto before = p.clone();
    auto st = AdamState<double>::zeros_like(p.named());
    set_grads(p, 0.0);
    adam_step(p.named(), st, AdamConfig{});
    const auto a = p.named();
    const auto b = before.named();
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].tensor->numel(); ++j) EXPECT_EQ(a[i].tensor->data()[j], b[i].tensor->data()[j]);
    EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepClosedForm) {
    Rng rng(1);
    auto p = ModelParams<double>::init(small_model(), rng);
    auto before = p.clone();
    auto st = AdamState<double>::zeros_like(p.named());
    const double g = 0.37;
    AdamConfig cfg;
    cfg.lr_global = 1e-3;
    cfg.lr_local = 1e-4;
    set_grads(p, g);
    adam_step(p.named(), st, cfg);
    const auto a = p.named();
    const auto b = before.named();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double lr = a[i].group == ParamGroup::local ? 1e-4 : 1e-3;
        for (std::size_t j = 0; j < a[i].tensor->numel(); ++j) {
            const double expected = -lr * g / (std::abs(g) + 1e-8);
            EXPECT_NEAR(a[i].tensor->data()[j] - b[i].tensor->data()[j], expected, 1e-15) << a[i].name;
        }
    }
}

TEST(Adam, ConstantGradientStepApproachesLr) {
    // Scalar simulation of the moment recursions.
    const double g = -2.5, lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0, v = 0, oracle_step = 0;
    Tensor w({1}, 1.0);
    std::vector<NamedParam<double>> named{{"w", &w, ParamGroup::global}};
    auto st = AdamState<double>::zeros_like(named);
    AdamConfig cfg;
    cfg.lr_global = lr;
    for (int t = 1; t <= 2000; ++t) {
        w.set_requires_grad(true);
        const double prev = w.data()[0];
        {
            GradTape<double> tape;
            tape.backward(sum(scale(w, g)));
        }
        adam_step(named, st, cfg);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        oracle_step = -lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
        // Differences of w carry its rounding (w grows to ~20 here).
        EXPECT_NEAR(w.data()[0] - prev, oracle_step, 1e-13);
        w = Tensor({1}, std::span<const double>(w.data()));
    }
    EXPECT_NEAR(std::abs(oracle_step), lr, 1e-9);
}

TEST(Adam, FusionUsesGlobalRate) {
    AdamConfig cfg;
    EXPECT_EQ(cfg.lr_for(ParamGroup::fusion), cfg.lr_global);
    EXPECT_EQ(cfg.lr_for(ParamGroup::local), 2e-5);
    EXPECT_EQ(cfg.lr_for(ParamGroup::global), 1e-4);
    EXPECT_EQ(cfg.beta1, 0.9);
    EXPECT_EQ(cfg.beta2, 0.999);
}

// --- forward_train --------------------------------------------------------------

struct Fixture {
    ModelConfig cfg = small_model();
    Tensor image;
    std::vector<std::uint8_t> labels;
    TileGrid grid;

    explicit Fixture(std::size_t side = 12, std::uint64_t seed = 11) {
        Rng rng(seed);
        image = uniform_tensor<double>({3, side, side}, 0, 1, rng);
        labels = random_labels(side * side, cfg.num_classes, rng);
        grid = plan_grid(side, side, cfg.patch, cfg.overlap);
    }
};

TEST(ForwardTrain, LossesFiniteAndNonNegative) {
    Fixture f;
    Rng rng(1);
    const auto p = ModelParams<double>::init(f.cfg, rng);
    const auto fw = forward_train(f.image, f.labels, f.grid, f.cfg, p);
    for (double v : {fw.loss.main, fw.loss.aux_global, fw.loss.aux_local, fw.loss.coupling, fw.loss.total}) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
    }
    EXPECT_EQ(fw.outputs.s_agg.shape(), (Shape{3, 12, 12}));
    EXPECT_EQ(fw.outputs.s_glb.shape(), (Shape{3, 8, 8}));
    ASSERT_EQ(fw.outputs.s_loc.size(), f.grid.size());
    EXPECT_EQ(fw.outputs.s_loc[0].shape(), (Shape{3, 8, 8}));
    EXPECT_EQ(fw.outputs.x_glb.shape(), (Shape{4, 2, 2}));
}

TEST(ForwardTrain, DefaultLossConstants) {
    const ModelConfig c;
    EXPECT_EQ(c.gamma, 6.0);
    EXPECT_EQ(c.lambda, 0.15);
    Fixture f;
    Rng rng(1);
    const auto p = ModelParams<double>::init(f.cfg, rng);
    const auto fw = forward_train(f.image, f.labels, f.grid, f.cfg, p);
    EXPECT_EQ(fw.loss.lambda, 0.15);
}

TEST(ForwardTrain, TotalResumsExactly) {
    for (std::uint64_t seed : {1, 2, 3}) {
        Fixture f(12, seed);
        Rng rng(seed);
        const auto p = ModelParams<double>::init(f.cfg, rng);
        const auto fw = forward_train(f.image, f.labels, f.grid, f.cfg, p);
        EXPECT_EQ(fw.loss.resum(), fw.loss.total);
        EXPECT_EQ(fw.total.item(), fw.loss.total);
    }
}

TEST(ForwardTrain, ZeroLambdaDetachesCoupling) {
    Fixture f;
    Rng rng(1);
    auto p = ModelParams<double>::init(f.cfg, rng);
    f.cfg.lambda = 0;
    const auto a = forward_train(f.image, f.labels, f.grid, f.cfg, p);
    EXPECT_GT(a.loss.coupling, 0.0);
    EXPECT_EQ(a.loss.total, (a.loss.main + a.loss.aux_global) + a.loss.aux_local);

    auto grads = [&](double lambda) {
        f.cfg.lambda = lambda;
        p.set_requires_grad(true);
        p.zero_grad();
        GradTape<double> tape;
        auto fw = forward_train(f.image, f.labels, f.grid, f.cfg, p);
        tape.backward(fw.total);
        std::vector<std::vector<double>> g;
        for (const auto& np : p.named()) g.push_back(np.tensor->grad());
        return g;
    };
    const auto g0 = grads(0.0);
    const auto g1 = grads(0.15);
    bool differs = false;
    for (std::size_t i = 0; i < g0.size(); ++i)
        for (std::size_t j = 0; j < g0[i].size(); ++j) differs |= g0[i][j] != g1[i][j];
    EXPECT_TRUE(differs);

    // Perturbing the local features only through the penalty leaves total unchanged.
    f.cfg.lambda = 0;
    const auto x_loc = stitch(std::vector<Tensor>{Tensor({4, 8, 8}, 1.0), Tensor({4, 8, 8}, 1.0),
                                                  Tensor({4, 8, 8}, 1.0), Tensor({4, 8, 8}, 1.0)},
                              f.grid);
    const auto penalty = coupling_penalty(x_loc, a.outputs.x_glb);
    LossBreakdown lb = a.loss;
    lb.coupling = penalty.item();
    EXPECT_EQ(lb.resum(), a.loss.total);
}

TEST(ForwardTrain, FlagCombinationsAreLive) {
    // An 8x8 global grid over 24x24 pixels, so a patch footprint excludes cells.
    Fixture f(24);
    f.cfg.downsample = {true, false};
    f.cfg.global_size = 16;
    Rng rng(1);
    const auto p = ModelParams<double>::init(f.cfg, rng);
    std::vector<Tensor> outs;
    for (const auto& v : ablation_variants()) {
        auto c = f.cfg;
        c.use_self_attn = v.use_self_attn;
        c.use_mask = v.use_mask;
        outs.push_back(forward_train(f.image, f.labels, f.grid, c, p).outputs.s_agg);
    }
    for (std::size_t i = 0; i < outs.size(); ++i)
        for (std::size_t j = i + 1; j < outs.size(); ++j) EXPECT_GT(max_abs_diff(outs[i], outs[j]), 0.0) << i << "," << j;
}

TEST(ForwardTrain, DeterministicAcrossRuns) {
    auto run = [] {
        Fixture f;
        Rng rng(1);
        const auto p = ModelParams<double>::init(f.cfg, rng);
        return forward_train(f.image, f.labels, f.grid, f.cfg, p).loss;
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.main, b.main);
    EXPECT_EQ(a.aux_global, b.aux_global);
    EXPECT_EQ(a.aux_local, b.aux_local);
    EXPECT_EQ(a.coupling, b.coupling);
    EXPECT_EQ(a.total, b.total);
}

TEST(ForwardTrain, RejectsBadLabels) {
    Fixture f;
    Rng rng(1);
    const auto p = ModelParams<double>::init(f.cfg, rng);
    f.labels[5] = 3;
    EXPECT_THROW(forward_train(f.image, f.labels, f.grid, f.cfg, p), DataError);
    f.labels[5] = kIgnoreLabel;
    EXPECT_NO_THROW(forward_train(f.image, f.labels, f.grid, f.cfg, p));
    f.labels.pop_back();
    EXPECT_THROW(forward_train(f.image, f.labels, f.grid, f.cfg, p), DataError);
}

TEST(ForwardTrain, ConstantLabelsAreLearnable) {
    RunConfig cfg;
    cfg.model = small_model();
    cfg.model.num_classes = 2;
    cfg.adam.lr_global = 1e-2;
    cfg.adam.lr_local = 1e-2;
    cfg.steps = 20;
    Rng rng(3);
    std::vector<Sample<double>> data{{"a", uniform_tensor<double>({3, 12, 12}, 0, 1, rng), std::vector<std::uint8_t>(144, 0)}};
    auto st = init_training<double>(cfg);
    std::vector<double> main;
    train_loop<double>(cfg, data, st, [&](const StepLog& l, TrainState<double>&) { main.push_back(l.loss.main); });
    ASSERT_EQ(main.size(), 20u);
    EXPECT_LT(main.back(), main.front());
}

TEST(ForwardTrain, EndToEndGradcheck) {
    const auto r = gradcheck_model(micro_config());
    EXPECT_TRUE(r.passed) << r.worst_param << " " << r.report.max_relative_error;
    EXPECT_LT(r.report.max_relative_error, 1e-4);
}

TEST(ForwardTrain, GradcheckWithUnitModelWidth) {
    auto cfg = micro_config();
    cfg.model.stage_channels = {4, 1};
    ASSERT_EQ(cfg.model.d_model(), 1u);
    const auto r = gradcheck_model(cfg);
    EXPECT_TRUE(r.passed) << r.worst_param << " " << r.report.max_relative_error;
}

TEST(ForwardTrain, CorruptedGradientFailsCheck) {
    const auto r = gradcheck_model(micro_config(), [](std::size_t input, std::span<double> g) {
        if (input == 3) g[0] += 0.5;
    });
    EXPECT_FALSE(r.passed);
}

// --- forward_infer -------------------------------------------------------------

TEST(ForwardInfer, SingleTileMatchesGlobal) {
    auto cfg = small_model();
    Rng rng(2);
    const auto p = ModelParams<double>::init(cfg, rng);
    const auto image = uniform_tensor<double>({3, 8, 8}, 0, 1, rng);
    const auto a = forward_infer(image, cfg, p, InferMode::patch);
    const auto b = forward_infer(image, cfg, p, InferMode::global);
    EXPECT_EQ(a.tiles, 1u);
    EXPECT_EQ(a.classes, b.classes);
}

TEST(ForwardInfer, OneClassGivesZeros) {
    auto cfg = small_model();
    cfg.num_classes = 1;
    Rng rng(2);
    const auto p = ModelParams<double>::init(cfg, rng);
    const auto image = uniform_tensor<double>({3, 12, 12}, 0, 1, rng);
    for (auto mode : {InferMode::patch, InferMode::global}) {
        const auto r = forward_infer(image, cfg, p, mode);
        EXPECT_EQ(r.classes, std::vector<std::uint8_t>(144, 0));
    }
}

TEST(ForwardInfer, ArgmaxTieGoesToLowestClass) {
    Tensor logits({3, 1, 2}, 0.5);
    logits.mutable_data()[3] = 0.7; // class 1, pixel 1
    logits.mutable_data()[5] = 0.7; // class 2, pixel 1
    EXPECT_EQ(argmax_classes(logits), (std::vector<std::uint8_t>{0, 1}));
}

TEST(ForwardInfer, PatchModeCoversNonSquareImage) {
    auto cfg = small_model();
    Rng rng(2);
    const auto p = ModelParams<double>::init(cfg, rng);
    const auto image = uniform_tensor<double>({3, 10, 17}, 0, 1, rng);
    const auto r = forward_infer(image, cfg, p, InferMode::patch);
    EXPECT_EQ(r.classes.size(), 170u);
    EXPECT_EQ(r.height, 10u);
    EXPECT_EQ(r.width, 17u);
    for (auto c : r.classes) EXPECT_LT(c, 3);
    EXPECT_GT(r.transient_peak_bytes, 0u);
}

TEST(ForwardInfer, RejectsWrongChannelCount) {
    auto cfg = small_model();
    Rng rng(2);
    const auto p = ModelParams<double>::init(cfg, rng);
    EXPECT_THROW(forward_infer(Tensor({1, 8, 8}), cfg, p, InferMode::patch), DimensionError);
}

// --- checkpoints -----------------------------------------------------------------

TEST(Checkpoint, RoundTrip) {
    Rng rng(5);
    auto cfg = small_model();
    auto p = ModelParams<double>::init(cfg, rng);
    auto st = AdamState<double>::zeros_like(p.named());
    set_grads(p, 0.25);
    AdamConfig adam;
    adam_step(p.named(), st, adam);
    const auto j = checkpoint_to_json(cfg, adam, p, st);
    auto ck = checkpoint_from_json<double>(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(ck.model, cfg);
    EXPECT_EQ(ck.state.step, 1u);
    EXPECT_EQ(ck.state.m, st.m);
    EXPECT_EQ(ck.state.v, st.v);
    const auto a = p.named();
    const auto b = ck.params.named();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        EXPECT_EQ(std::vector<double>(a[i].tensor->data().begin(), a[i].tensor->data().end()),
                  std::vector<double>(b[i].tensor->data().begin(), b[i].tensor->data().end()));
    }
    EXPECT_EQ(checkpoint_to_json(ck.model, ck.adam, ck.params, ck.state).dump(), j.dump());
}

TEST(Checkpoint, RejectsShapeMismatch) {
    Rng rng(5);
    auto cfg = small_model();
    auto p = ModelParams<double>::init(cfg, rng);
    const auto st = AdamState<double>::zeros_like(p.named());
    auto j = checkpoint_to_json(cfg, AdamConfig{}, p, st);
    j["params"][0]["shape"][0] = 5;
    EXPECT_THROW(checkpoint_from_json<double>(j), DataError);

    j = checkpoint_to_json(cfg, AdamConfig{}, p, st);
    j["config"]["stage_channels"] = {4, 6};
    EXPECT_THROW(checkpoint_from_json<double>(j), DataError);

    j = checkpoint_to_json(cfg, AdamConfig{}, p, st);
    j["params"][2]["name"] = "renamed";
    EXPECT_THROW(checkpoint_from_json<double>(j), DataError);

    j = checkpoint_to_json(cfg, AdamConfig{}, p, st);
    j.erase("optimizer");
    EXPECT_THROW(checkpoint_from_json<double>(j), DataError);
}

} // namespace
} // namespace glcanet
