// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"
#include "test_util.hpp"

#include "snnconv/error.hpp"
#include "snnconv/fixtures.hpp"
#include "snnconv/netspec.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <random>

using namespace snnconv;
using testutil::TempDir;

namespace {

// conv 3x3 same 1->2, then dense 2*2*2 -> 3, on a 2x2x1 input.
const char* kTwoLayerManifest = R"({
  "input_shape": [2, 2, 1],
  "alpha": 0.1,
  "layers": [
    {"kind": "conv2d", "in_ch": 1, "out_ch": 2, "kernel": 3, "stride": 1, "padding": "same",
     "has_batchnorm": false, "activation": "leaky_relu"},
    {"kind": "dense", "in_ch": 8, "out_ch": 3, "has_batchnorm": false, "activation": "none"}
  ]
})";

constexpr std::size_t kTwoLayerFloats = 2 * 9 + 2 + 3 * 8 + 3;

std::vector<float> ramp(std::size_t n, float scale = 0.01f) {
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = scale * static_cast<float>(i % 17) - 0.05f;
    return v;
}

void expect_error_contains(const std::function<void()>& fn, const std::string& needle) {
    try {
        fn();
        FAIL() << "expected an error containing '" << needle << "'";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
}

} // namespace

TEST(ModelIo, LoadsTwoLayerManifest) {
    TempDir dir("netspec");
    testutil::write_file(dir / "model.json", kTwoLayerManifest);
    write_f32_file(dir / "model.bin", ramp(kTwoLayerFloats));

    const NetworkSpec net = load_model(dir / "model.json");
    ASSERT_EQ(net.layers.size(), 2u);
    EXPECT_EQ(net.input_shape, (Shape3{1, 2, 2}));
    EXPECT_FLOAT_EQ(net.alpha, 0.1f);
    EXPECT_EQ(net.layers[0].out_shape, (Shape3{2, 2, 2}));
    EXPECT_EQ(net.layers[1].out_shape, (Shape3{3, 1, 1}));
    EXPECT_EQ(net.layers[1].weights.size(), 24u);
    EXPECT_EQ(net.layers[1].bias[2], ramp(kTwoLayerFloats)[kTwoLayerFloats - 1]);
}

TEST(ModelIo, ShortBlobNamesTheLayer) {
    TempDir dir("netspec");
    testutil::write_file(dir / "model.json", kTwoLayerManifest);
    write_f32_file(dir / "model.bin", ramp(kTwoLayerFloats - 1));
    expect_error_contains([&] { load_model(dir / "model.json"); }, "weight blob length mismatch at layer 1");
}

TEST(ModelIo, LongBlobIsRejected) {
    TempDir dir("netspec");
    testutil::write_file(dir / "model.json", kTwoLayerManifest);
    write_f32_file(dir / "model.bin", ramp(kTwoLayerFloats + 2));
    expect_error_contains([&] { load_model(dir / "model.json"); }, "weight blob length mismatch");
}

TEST(ModelIo, IncompatibleInChannels) {
    TempDir dir("netspec");
    std::string text = kTwoLayerManifest;
    text.replace(text.find("\"in_ch\": 1"), 10, "\"in_ch\": 3");
    testutil::write_file(dir / "model.json", text);
    write_f32_file(dir / "model.bin", ramp(kTwoLayerFloats));
    expect_error_contains([&] { load_model(dir / "model.json"); }, "layer 0: in_ch 3 is incompatible");
}

TEST(ModelIo, MalformedJson) {
    TempDir dir("netspec");
    testutil::write_file(dir / "model.json", "{\"input_shape\": [2, 2,");
    expect_error_contains([&] { load_model(dir / "model.json"); }, "malformed JSON");
}

TEST(ModelIo, NonLinearHeadRejected) {
    TempDir dir("netspec");
    std::string text = kTwoLayerManifest;
    text.replace(text.find("\"activation\": \"none\""), 20, "\"activation\": \"leaky_relu\"");
    testutil::write_file(dir / "model.json", text);
    write_f32_file(dir / "model.bin", ramp(kTwoLayerFloats));
    expect_error_contains([&] { load_model(dir / "model.json"); }, "layer 1: final layer must be");
}

TEST(ModelIo, SaveLoadRoundTrip) {
    fixtures::RandomNetOptions opts;
    opts.batchnorm = true;
    const NetworkSpec net = fixtures::random_network(11, opts);
    TempDir dir("netspec");
    save_model(net, dir / "net.json");
    const NetworkSpec back = load_model(dir / "net.json");
    ASSERT_EQ(back.layers.size(), net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        EXPECT_EQ(back.layers[i].weights, net.layers[i].weights);
        EXPECT_EQ(back.layers[i].bias, net.layers[i].bias);
        EXPECT_EQ(back.layers[i].out_shape, net.layers[i].out_shape);
        EXPECT_EQ(back.layers[i].batchnorm.has_value(), net.layers[i].batchnorm.has_value());
    }
    const auto x = fixtures::random_inputs(net.input_shape, 1, 5)[0];
    EXPECT_EQ(forward_output(back, x), forward_output(net, x));
}

TEST(ModelIo, ActivationDumpRoundTrip) {
    const NetworkSpec net = fixtures::random_network(3);
    const auto inputs = fixtures::random_inputs(net.input_shape, 3, 9);
    std::vector<std::vector<Tensor>> acts;
    for (const auto& x : inputs) acts.push_back(forward(net, x));
    TempDir dir("dump");
    write_activation_dump(dir.path(), acts);
    EXPECT_EQ(read_activation_dump(dir.path()), acts);
}

TEST(Forward, LeakySlopeOnNegativeInput) {
    const NetworkSpec linear = testutil::single_conv(1.0f, 0.0f, 0.1f);
    NetworkSpec net;
    net.input_shape = {1, 1, 1};
    net.alpha = 0.1f;
    LayerSpec hidden = linear.layers[0];
    hidden.activation = Activation::leaky_relu;
    net.layers = {hidden, linear.layers[0]};
    net.resolve();
    const auto acts = forward(net, Tensor({1, 1, 1}, -1.0f));
    EXPECT_FLOAT_EQ(acts[0][0], -0.1f);
    EXPECT_FLOAT_EQ(acts[1][0], -0.1f);
}

TEST(Forward, ZeroInputZeroBiasGivesZeros) {
    NetworkSpec net = fixtures::random_network(21);
    for (auto& L : net.layers) std::fill(L.bias.begin(), L.bias.end(), 0.0f);
    const Tensor out = forward_output(net, Tensor::of(net.input_shape));
    for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

struct ConvCase {
    std::size_t stride;
    Padding padding;
};

class ConvAgainstNaive : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvAgainstNaive, MatchesPaddedLoop) {
    const auto [stride, padding] = GetParam();
    std::mt19937 rng(17);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    NetworkSpec net;
    net.input_shape = {2, 4, 4};
    LayerSpec L;
    L.kind = LayerKind::conv2d;
    L.out_channels = 3;
    L.kernel = 3;
    L.stride = stride;
    L.padding = padding;
    L.activation = Activation::none;
    L.weights.resize(3 * 2 * 9);
    L.bias.resize(3);
    for (auto& w : L.weights) w = nd(rng);
    for (auto& b : L.bias) b = nd(rng);
    net.layers.push_back(L);
    net.resolve();

    Tensor x = Tensor::of(net.input_shape);
    for (auto& v : x.data()) v = nd(rng);
    const Tensor y = forward_output(net, x);
    const Shape3 os = net.layers[0].out_shape;

    // TF-style same padding: total = max((out-1)*stride + k - in, 0), half before.
    std::size_t pad = 0;
    if (padding == Padding::same) {
        const std::size_t out = (4 + stride - 1) / stride;
        const long total = std::max<long>(0, static_cast<long>((out - 1) * stride + 3) - 4);
        pad = static_cast<std::size_t>(total / 2);
        EXPECT_EQ(os.height, out);
    } else {
        EXPECT_EQ(os.height, (4 - 3) / stride + 1);
    }
    const auto ref = oracle::naive_conv({x.data().begin(), x.data().end()}, 2, 4, 4, L.weights, L.bias, 3, 3,
                                        stride, pad, pad, os.height, os.width);
    ASSERT_EQ(ref.size(), y.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-5 * (1.0 + std::abs(ref[i])));
}

INSTANTIATE_TEST_SUITE_P(Geometries, ConvAgainstNaive,
                         ::testing::Values(ConvCase{1, Padding::same}, ConvCase{1, Padding::valid},
                                           ConvCase{2, Padding::same}, ConvCase{2, Padding::valid}),
                         [](const auto& info) {
                             return to_string(info.param.padding) + "_stride" + std::to_string(info.param.stride);
                         });

TEST(Forward, BitwiseDeterministic) {
    const NetworkSpec net = fixtures::random_network(8);
    const auto x = fixtures::random_inputs(net.input_shape, 1, 1)[0];
    const Tensor a = forward_output(net, x);
    const Tensor b = forward_output(net, x);
    EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)), 0);
}

TEST(Forward, PositivelyHomogeneousWithoutBias) {
    NetworkSpec net = fixtures::random_network(14);
    for (auto& L : net.layers) std::fill(L.bias.begin(), L.bias.end(), 0.0f);
    const auto x = fixtures::random_inputs(net.input_shape, 1, 2, -1.0f, 1.0f)[0];
    Tensor x2 = x;
    for (auto& v : x2.data()) v *= 2.0f;
    const Tensor a = forward_output(net, x);
    const Tensor b = forward_output(net, x2);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2.0f * a[i], 1e-5f * (1.0f + std::abs(b[i])));
}

TEST(Resolve, RejectsBadInvariants) {
    NetworkSpec net = testutil::single_conv(1.0f, 0.0f, 0.1f);
    net.alpha = 1.5f;
    expect_error_contains([&] { net.resolve(); }, "alpha must lie in (0, 1]");

    net = testutil::single_conv(1.0f, 0.0f, 0.1f);
    net.layers[0].bias.clear();
    expect_error_contains([&] { net.resolve(); }, "layer 0");

    net = testutil::single_conv(1.0f, 0.0f, 0.1f, 2, 2);
    net.layers[0].kernel = 3;
    net.layers[0].weights.assign(9, 0.0f);
    expect_error_contains([&] { net.resolve(); }, "larger than input");

    net = testutil::single_conv(1.0f, 0.0f, 0.1f);
    net.layers.clear();
    expect_error_contains([&] { net.resolve(); }, "no layers");
}

TEST(FoldBatchnorm, IdentityLeavesWeights) {
    NetworkSpec net = testutil::single_conv(0.7f, 0.2f, 0.1f);
    net.layers[0].batchnorm = BatchNorm{{1.0f}, {0.0f}, {0.0f}, {1.0f}, 0.0f};
    net.resolve();
    const NetworkSpec folded = fold_batchnorm(net);
    EXPECT_FALSE(folded.layers[0].batchnorm);
    EXPECT_FLOAT_EQ(folded.layers[0].weights[0], 0.7f);
    EXPECT_FLOAT_EQ(folded.layers[0].bias[0], 0.2f);
}

TEST(FoldBatchnorm, ScalesByGammaOverStd) {
    // gamma 2, variance 1, epsilon 0: w' = 0.5 * 2 = 1.0; b' = (0.3 - 0.1) * 2 + 0.5 = 0.9.
    NetworkSpec net = testutil::single_conv(0.5f, 0.3f, 0.1f);
    net.layers[0].batchnorm = BatchNorm{{2.0f}, {0.5f}, {0.1f}, {1.0f}, 0.0f};
    net.resolve();
    const NetworkSpec folded = fold_batchnorm(net);
    EXPECT_FLOAT_EQ(folded.layers[0].weights[0], 1.0f);
    EXPECT_FLOAT_EQ(folded.layers[0].bias[0], 0.9f);
}

TEST(FoldBatchnorm, RandomNetsAgree) {
    fixtures::RandomNetOptions opts;
    opts.batchnorm = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const NetworkSpec net = fixtures::random_network(100 + seed, opts);
        const NetworkSpec folded = fold_batchnorm(net);
        for (const auto& x : fixtures::random_inputs(net.input_shape, 100, seed, -1.0f, 1.0f)) {
            const Tensor a = forward_output(net, x);
            const Tensor b = forward_output(folded, x);
            for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-5f) << "seed " << seed;
        }
    }
}
