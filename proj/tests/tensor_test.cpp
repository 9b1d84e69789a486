// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "glcanet/gradcheck.hpp"
#include "glcanet/ops.hpp"

namespace glcanet {
namespace {

using Tensor = glcanet::Tensor<double>;
using Inputs = std::vector<Tensor>;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    return uniform_tensor<double>(std::move(shape), lo, hi, rng);
}

void expect_values(const Tensor& t, std::vector<double> expected, double tol = 0.0) {
    ASSERT_EQ(t.numel(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t[i], expected[i], tol) << "index " << i;
}

// Triple-loop matmul used as the oracle.
std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t p = 0; p < k; ++p) out[i * n + j] += a[i * k + p] * b[p * n + j];
    return out;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor m({2, 2}, {3, 4, 5, 6});
    expect_values(matmul(eye, m), {3, 4, 5, 6});
}

TEST(Matmul, TwoByTwoProduct) {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    expect_values(matmul(a, b), {19, 22, 43, 50});
}

TEST(Matmul, ZeroMatrixGivesZero) {
    Rng rng(1);
    Tensor z({3, 4});
    auto out = matmul(z, random_tensor({4, 5}, rng));
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, ExactAgainstTripleLoopOnIntegers) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);
        Tensor a({m, k}), b({k, n});
        for (auto& v : a.mutable_data()) v = static_cast<double>(rng.below(21)) - 10.0;
        for (auto& v : b.mutable_data()) v = static_cast<double>(rng.below(21)) - 10.0;
        const auto expected = naive_matmul(a, b);
        const auto got = matmul(a, b);
        for (std::size_t i = 0; i < expected.size(); ++i) ASSERT_EQ(got[i], expected[i]);
    }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    Tensor a({2, 3}), b({2, 3});
    try {
        matmul(a, b);
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
    }
}

TEST(Softmax, ConstantRowIsUniform) {
    for (double c : {-3.0, 0.0, 17.5}) {
        Tensor x({1, 4}, {c, c, c, c});
        expect_values(softmax_rows(x), {0.25, 0.25, 0.25, 0.25}, 1e-15);
    }
}

TEST(Softmax, LogTwoRow) {
    Tensor x({1, 2}, {0.0, std::log(2.0)});
    const double z = std::exp(0.0) + std::exp(std::log(2.0));
    expect_values(softmax_rows(x), {1.0 / z, 2.0 / z}, 1e-15);
    expect_values(softmax_rows(x), {1.0 / 3.0, 2.0 / 3.0}, 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
    Tensor x({1, 2}, {1000.0, 1000.0});
    expect_values(softmax_rows(x), {0.5, 0.5});
}

TEST(Softmax, RowsSumToOneAtExtremeMagnitudes) {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng.below(6), n = 1 + rng.below(9);
        auto x = random_tensor({m, n}, rng, -1e6, 1e6);
        auto y = softmax_rows(x);
        for (std::size_t i = 0; i < m; ++i) {
            double total = 0;
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_GE(y[i * n + j], 0.0);
                total += y[i * n + j];
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(Conv2d, CenteredDeltaKernelIsIdentity) {
    Rng rng(5);
    auto x = random_tensor({1, 5, 6}, rng);
    for (std::size_t k : {1u, 3u, 5u}) {
        Tensor kernel({1, 1, k, k});
        kernel.mutable_data()[(k / 2) * k + k / 2] = 1.0;
        auto y = conv2d(x, kernel, (k - 1) / 2);
        ASSERT_EQ(y.shape(), x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
    }
}

TEST(Conv2d, OnesKernelSumsWindow) {
    Tensor x({1, 2, 2}, {1, 2, 3, 4});
    Tensor k({1, 1, 2, 2}, {1, 1, 1, 1});
    auto y = conv2d(x, k, 0);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
    EXPECT_EQ(y[0], 10.0);
}

TEST(Conv2d, ZeroKernelGivesZero) {
    Rng rng(6);
    auto y = conv2d(random_tensor({2, 4, 4}, rng), Tensor({3, 2, 3, 3}), 1);
    for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, MatchesDirectSummation) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t C = 1 + rng.below(3), O = 1 + rng.below(3), H = 3 + rng.below(5), W = 3 + rng.below(5);
        const std::size_t k = rng.below(2) ? 3 : 1, pad = rng.below(2);
        auto x = random_tensor({C, H, W}, rng);
        auto kern = random_tensor({O, C, k, k}, rng);
        auto y = conv2d(x, kern, pad);
        const std::size_t OH = H + 2 * pad - k + 1, OW = W + 2 * pad - k + 1;
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t r = 0; r < OH; ++r)
                for (std::size_t q = 0; q < OW; ++q) {
                    double acc = 0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t i = 0; i < k; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                                const long ir = static_cast<long>(r + i) - static_cast<long>(pad);
                                const long iq = static_cast<long>(q + j) - static_cast<long>(pad);
                                if (ir < 0 || iq < 0 || ir >= static_cast<long>(H) || iq >= static_cast<long>(W)) continue;
                                acc += kern[((o * C + c) * k + i) * k + j] * x[(c * H + ir) * W + iq];
                            }
                    EXPECT_NEAR(y[(o * OH + r) * OW + q], acc, 1e-12);
                }
    }
}

TEST(Conv2d, KernelLargerThanPaddedInputThrows) {
    EXPECT_THROW(conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 5, 5}), 1), DimensionError);
}

TEST(Elementwise, ReluSigns) { expect_values(relu(Tensor({3}, {-1, 0, 2})), {0, 0, 2}); }

TEST(Elementwise, AvgPoolTwoByTwo) {
    auto y = avg_pool2d(Tensor({1, 2, 2}, {1, 2, 3, 4}), 2);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
    EXPECT_EQ(y[0], 2.5);
}

TEST(Elementwise, ConcatStacksChannels) {
    auto y = concat_channels(Tensor({1, 1, 2}, {1, 2}), Tensor({2, 1, 2}, {3, 4, 5, 6}));
    EXPECT_EQ(y.shape(), (Shape{3, 1, 2}));
    expect_values(y, {1, 2, 3, 4, 5, 6});
}

TEST(Bilinear, SameSizeIsIdentity) {
    Rng rng(9);
    auto x = random_tensor({2, 5, 7}, rng);
    auto y = bilinear_resize(x, 5, 7);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Bilinear, ConstantRoundTripIsExact) {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const double c = rng.uniform(-5, 5);
        const std::size_t H = 1 + rng.below(9), W = 1 + rng.below(9);
        const std::size_t h = 1 + rng.below(17), w = 1 + rng.below(17);
        Tensor x({2, H, W}, c);
        auto back = bilinear_resize(bilinear_resize(x, h, w), H, W);
        for (double v : back.data()) ASSERT_EQ(v, c);
    }
}

TEST(Bilinear, NonPositiveTargetThrows) { EXPECT_THROW(bilinear_resize(Tensor({1, 2, 2}), 0, 2), DimensionError); }

TEST(Bilinear, WindowMatchesCropOfFullResize) {
    Rng rng(12);
    auto x = random_tensor({2, 6, 5}, rng);
    auto full = bilinear_resize(x, 20, 17);
    auto win = bilinear_resize_window(x, 20, 17, 4, 3, 9, 11);
    auto cropped = crop(full, 4, 3, 9, 11);
    for (std::size_t i = 0; i < win.numel(); ++i) EXPECT_EQ(win[i], cropped[i]);
}

TEST(Backward, SumGivesOnes) {
    Rng rng(13);
    auto x = random_tensor({3, 4}, rng).set_requires_grad();
    GradTape<double> tape;
    tape.backward(sum(x));
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquaresGivesTwoX) {
    Rng rng(14);
    auto x = random_tensor({5}, rng).set_requires_grad();
    GradTape<double> tape;
    tape.backward(sum(mul(x, x)));
    const auto g = x.grad();
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(g[i], 2.0 * x[i]);
}

TEST(Backward, NonScalarLossRejected) {
    Tensor x({2}, {1, 2});
    x.set_requires_grad();
    GradTape<double> tape;
    auto y = scale(x, 2.0);
    EXPECT_THROW(tape.backward(y), UsageError);
}

TEST(Backward, SecondBackwardOnSameTapeRejected) {
    Tensor x({2}, {1, 2});
    x.set_requires_grad();
    GradTape<double> tape;
    auto loss = sum(mul(x, x));
    tape.backward(loss);
    EXPECT_THROW(tape.backward(loss), UsageError);
    expect_values(Tensor({2}, x.grad()), {2, 4});
}

TEST(Backward, LossNotOnTapeRejected) {
    GradTape<double> tape;
    EXPECT_THROW(tape.backward(Tensor::scalar(1.0)), UsageError);
}

TEST(Backward, VisitsInReverseOrderThroughSharedInputs) {
    // y = x * x + x uses x twice; dy/dx = 2x + 1.
    Tensor x({3}, {1, -2, 0.5});
    x.set_requires_grad();
    GradTape<double> tape;
    tape.backward(sum(add(mul(x, x), x)));
    expect_values(Tensor({3}, x.grad()), {3, -3, 2}, 1e-15);
}

TEST(Backward, NoTapeMeansNothingRecorded) {
    Tensor x({2}, {1, 2});
    x.set_requires_grad();
    auto y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, GradientShapeMatchesTensor) {
    Rng rng(2);
    auto w = random_tensor({3, 2}, rng).set_requires_grad();
    auto x = random_tensor({4, 3}, rng);
    GradTape<double> tape;
    tape.backward(sum(matmul(x, w)));
    EXPECT_EQ(w.grad().size(), w.numel());
}

// --- finite-difference checks -------------------------------------------------

constexpr double kEps = 1e-5;

TEST(Gradcheck, IdentityIsExactUpToRounding) {
    Rng rng(20);
    const double err = gradcheck<double>([](const Inputs& in) { return in[0]; }, {random_tensor({3, 3}, rng)}, kEps);
    EXPECT_LT(err, 1e-9);
}

TEST(Gradcheck, Matmul3x3) {
    Rng rng(21);
    const double err = gradcheck<double>([](const Inputs& in) { return matmul(in[0], in[1]); },
                                         {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)}, kEps);
    EXPECT_LT(err, 1e-6);
}

TEST(Gradcheck, SoftmaxOfScaled) {
    Rng rng(22);
    const double err = gradcheck<double>([](const Inputs& in) { return softmax_rows(scale(in[0], 0.7)); },
                                         {random_tensor({3, 5}, rng)}, kEps);
    EXPECT_LT(err, 1e-5);
}

struct OpCase {
    const char* name;
    std::function<Tensor(const Inputs&)> f;
    std::vector<Shape> shapes;
};

TEST(Gradcheck, EveryDifferentiableOp) {
    std::vector<std::uint8_t> targets = {0, 2, 1, 255, 1, 0};
    const std::vector<OpCase> cases = {
        {"matmul_nt", [](const Inputs& in) { return matmul_nt(in[0], in[1]); }, {{3, 4}, {5, 4}}},
        {"transpose", [](const Inputs& in) { return transpose(in[0]); }, {{3, 4}}},
        {"reshape", [](const Inputs& in) { return reshape(in[0], {2, 6}); }, {{3, 4}}},
        {"add", [](const Inputs& in) { return add(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        {"sub", [](const Inputs& in) { return sub(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        {"mul", [](const Inputs& in) { return mul(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        {"scale", [](const Inputs& in) { return scale(in[0], -1.5); }, {{4}}},
        {"relu", [](const Inputs& in) { return relu(in[0]); }, {{4, 4}}},
        {"sum", [](const Inputs& in) { return sum(in[0]); }, {{2, 3}}},
        {"norm2", [](const Inputs& in) { return norm2(in[0]); }, {{2, 3}}},
        {"softmax", [](const Inputs& in) { return softmax_rows(in[0]); }, {{4, 6}}},
        {"conv2d_pad1", [](const Inputs& in) { return conv2d(in[0], in[1], 1); }, {{2, 5, 4}, {3, 2, 3, 3}}},
        {"conv2d_pad0", [](const Inputs& in) { return conv2d(in[0], in[1], 0); }, {{2, 5, 4}, {2, 2, 3, 3}}},
        {"bias", [](const Inputs& in) { return add_channel_bias(in[0], in[1]); }, {{3, 2, 2}, {3}}},
        {"avg_pool", [](const Inputs& in) { return avg_pool2d(in[0], 2); }, {{2, 5, 6}}},
        {"concat", [](const Inputs& in) { return concat_channels(in[0], in[1]); }, {{1, 2, 3}, {2, 2, 3}}},
        {"crop", [](const Inputs& in) { return crop(in[0], 1, 2, 4, 4); }, {{2, 4, 5}}},
        {"resize_up", [](const Inputs& in) { return bilinear_resize(in[0], 7, 9); }, {{2, 3, 4}}},
        {"resize_down", [](const Inputs& in) { return bilinear_resize(in[0], 2, 3); }, {{2, 5, 7}}},
        {"focal_g6", [&](const Inputs& in) { return focal_loss(in[0], targets, 6.0); }, {{3, 2, 3}}},
        {"focal_g0", [&](const Inputs& in) { return focal_loss(in[0], targets, 0.0); }, {{3, 2, 3}}},
    };
    Rng rng(30);
    for (const auto& c : cases) {
        Inputs inputs;
        for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng));
        const auto report = gradcheck_report<double>(c.f, inputs, kEps);
        EXPECT_LT(report.max_relative_error, 1e-5) << c.name << " worst analytic " << report.worst_analytic
                                                  << " numeric " << report.worst_numeric;
    }
}

TEST(Gradcheck, HookedCorruptionIsDetected) {
    Rng rng(31);
    GradHook<double> hook = [](std::size_t, std::span<double> g) { g[0] += 1.0; };
    const auto report = gradcheck_report<double>([](const Inputs& in) { return mul(in[0], in[0]); },
                                                 {random_tensor({4}, rng)}, kEps, 7, hook);
    EXPECT_GT(report.max_relative_error, 1e-2);
}

TEST(Gradcheck, RestoresInputs) {
    Rng rng(32);
    auto x = random_tensor({3}, rng);
    const auto before = std::vector<double>(x.data().begin(), x.data().end());
    gradcheck<double>([](const Inputs& in) { return relu(in[0]); }, {x}, kEps);
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(x[i], before[i]);
    EXPECT_FALSE(x.requires_grad());
}

TEST(Focal, GammaZeroIsCrossEntropy) {
    Rng rng(40);
    auto logits = random_tensor({3, 2, 2}, rng);
    std::vector<std::uint8_t> t = {0, 1, 2, 1};
    double ce = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        double z = 0;
        for (std::size_t k = 0; k < 3; ++k) z += std::exp(logits[k * 4 + i]);
        ce += -std::log(std::exp(logits[t[i] * 4 + i]) / z);
    }
    EXPECT_NEAR(focal_loss(logits, t, 0.0).item(), ce / 4, 1e-12);
}

TEST(Focal, HugeTrueLogitGivesZero) {
    Tensor logits({2, 1, 1}, {200.0, 0.0});
    std::vector<std::uint8_t> t = {0};
    EXPECT_NEAR(focal_loss(logits, t, 6.0).item(), 0.0, 1e-300);
}

TEST(Focal, SinglePixelHalfProbability) {
    Tensor logits({2, 1, 1}, {0.0, 0.0});
    std::vector<std::uint8_t> t = {0};
    EXPECT_NEAR(focal_loss(logits, t, 6.0).item(), std::pow(0.5, 6) * std::log(2.0), 1e-12);
}

TEST(Focal, InvalidTargetIsDataError) {
    Tensor logits({2, 1, 1});
    std::vector<std::uint8_t> t = {2};
    EXPECT_THROW(focal_loss(logits, t, 6.0), DataError);
}

TEST(Ledger, TracksTensorPayloads) {
    auto& ledger = AllocationLedger::instance();
    const std::size_t before = ledger.current();
    {
        Tensor t({10, 10});
        EXPECT_EQ(ledger.current(), before + 100 * sizeof(double));
    }
    EXPECT_EQ(ledger.current(), before);
}

} // namespace
} // namespace glcanet
