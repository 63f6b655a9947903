// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"
#include "test_util.hpp"

#include "snnconv/calibrate.hpp"
#include "snnconv/error.hpp"
#include "snnconv/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace snnconv;

namespace {

// 1x1 conv 1 -> 2 (leaky), then dense 2 -> 1 (linear).
NetworkSpec two_channel_net() {
    NetworkSpec net;
    net.input_shape = {1, 1, 1};
    net.alpha = 0.1f;
    LayerSpec conv;
    conv.kind = LayerKind::conv2d;
    conv.out_channels = 2;
    conv.weights = {1.0f, 1.0f};
    conv.bias = {0.0f, 0.0f};
    LayerSpec head;
    head.kind = LayerKind::dense;
    head.out_channels = 1;
    head.activation = Activation::none;
    head.weights = {1.0f, 1.0f};
    head.bias = {0.0f};
    net.layers = {conv, head};
    net.resolve();
    return net;
}

std::vector<Tensor> layer_acts(std::vector<float> hidden, float out) {
    return {Tensor({2, 1, 1}, std::move(hidden)), Tensor({1, 1, 1}, out)};
}

double coefficient_of_variation(const std::vector<float>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (float x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size())) / mean;
}

} // namespace

TEST(Stats, MaxPerChannelAndLayer) {
    const NetworkSpec net = two_channel_net();
    const std::vector<std::vector<Tensor>> acts = {
        layer_acts({0.8f, 0.05f}, -2.0f),
        layer_acts({0.3f, 0.1f}, 1.5f),
        layer_acts({-0.9f, -0.04f}, 0.5f),
    };
    const ActivationStats s = stats_from_activations(net, acts, PercentileMode::max);
    ASSERT_EQ(s.layers.size(), 2u);
    EXPECT_FLOAT_EQ(s.layers[0].lambda_chan[0], 0.8f);
    EXPECT_FLOAT_EQ(s.layers[0].lambda_chan[1], 0.1f);
    EXPECT_FLOAT_EQ(s.layers[0].lambda_layer, 0.8f);
    // The linear head is scaled by magnitude.
    EXPECT_FLOAT_EQ(s.layers[1].lambda_layer, 2.0f);
    EXPECT_EQ(s.sample_count, 3u);
}

TEST(Stats, SilentChannelIsFlooredAndFlagged) {
    const NetworkSpec net = two_channel_net();
    const std::vector<std::vector<Tensor>> acts = {layer_acts({0.5f, 0.0f}, 1.0f),
                                                   layer_acts({0.2f, -0.3f}, 1.0f)};
    const ActivationStats s = stats_from_activations(net, acts, PercentileMode::max);
    EXPECT_FLOAT_EQ(s.layers[0].lambda_chan[1], kLambdaFloor);
    ASSERT_EQ(s.layers[0].degenerate_channels.size(), 1u);
    EXPECT_EQ(s.layers[0].degenerate_channels[0], 1u);
    EXPECT_FALSE(s.layers[0].layer_degenerate);
}

TEST(Stats, EmptyCalibrationSetRejected) {
    const NetworkSpec net = two_channel_net();
    EXPECT_THROW(collect_stats(net, std::span<const Tensor>{}, PercentileMode::max), InputError);
}

TEST(Stats, UnfoldedBatchnormRejected) {
    NetworkSpec net = two_channel_net();
    net.layers[0].batchnorm = BatchNorm{{1, 1}, {0, 0}, {0, 0}, {1, 1}, 1e-3f};
    const std::vector<Tensor> x = {Tensor({1, 1, 1}, 0.5f)};
    EXPECT_THROW(collect_stats(net, x, PercentileMode::max), InputError);
}

TEST(Percentile, UniformSamplesNear999) {
    std::mt19937 rng(123);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    std::vector<float> v(1000);
    for (auto& x : v) x = ud(rng);
    const float p = nearest_rank_percentile(v, 99.9);
    EXPECT_NEAR(p, 0.999f, 0.005f);
    EXPECT_EQ(p, oracle::sorted_percentile(v, 99.9));
    EXPECT_EQ(nearest_rank_percentile(v, 100.0), *std::max_element(v.begin(), v.end()));
    EXPECT_EQ(nearest_rank_percentile({}, 99.9), 0.0f);
}

TEST(Percentile, MatchesSortOracleAcrossSizes) {
    std::mt19937 rng(7);
    std::exponential_distribution<float> ed(2.0f);
    for (std::size_t n : {1u, 2u, 999u, 1000u, 1001u, 4567u}) {
        std::vector<float> v(n);
        for (auto& x : v) x = ed(rng);
        for (double pct : {50.0, 99.0, 99.9}) {
            EXPECT_EQ(nearest_rank_percentile(v, pct), oracle::sorted_percentile(v, pct)) << n << " " << pct;
        }
    }
}

TEST(Normalize, LayerNormArithmetic) {
    // w = 2, lambda_prev = 0.5, lambda = 4 -> 2 * 0.5 / 4 = 0.25
    NetworkSpec net = testutil::single_conv(2.0f, 1.0f, 0.1f);
    ActivationStats s;
    s.layers = {LayerStats{4.0f, {4.0f}, false, {}}};
    const NormalizedNetwork n = layer_norm(net, s, 0.5f);
    EXPECT_FLOAT_EQ(n.net.layers[0].weights[0], 0.25f);
    EXPECT_FLOAT_EQ(n.net.layers[0].bias[0], 0.25f);
    EXPECT_FLOAT_EQ(n.output_scale[0], 4.0f);
}

TEST(Normalize, ChannelNormArithmetic) {
    // conv 1x1 1 -> 2 then dense 2 -> 1; second-layer weight from channel 1: 1 * 0.5 / 0.25 = 2.
    NetworkSpec net = two_channel_net();
    ActivationStats s;
    s.layers = {LayerStats{0.8f, {0.8f, 0.5f}, false, {}}, LayerStats{0.25f, {0.25f}, false, {}}};
    const NormalizedNetwork n = channel_norm(net, s);
    EXPECT_FLOAT_EQ(n.net.layers[0].weights[0], 1.0f / 0.8f);
    EXPECT_FLOAT_EQ(n.net.layers[0].weights[1], 1.0f / 0.5f);
    EXPECT_FLOAT_EQ(n.net.layers[1].weights[0], 0.8f / 0.25f);
    EXPECT_FLOAT_EQ(n.net.layers[1].weights[1], 2.0f);
}

TEST(Normalize, RemeasuredMaximaAreOne) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const NetworkSpec net = fixtures::random_network(seed);
        const auto calib = fixtures::random_inputs(net.input_shape, 40, seed + 50);
        const ActivationStats s = collect_stats(net, calib, PercentileMode::max);
        for (NormScheme scheme : {NormScheme::layer_norm, NormScheme::channel_norm}) {
            const NormalizedNetwork n = normalize(net, s, scheme);
            const ActivationStats again = collect_stats(n.net, calib, PercentileMode::max);
            for (std::size_t l = 0; l < again.layers.size(); ++l) {
                if (s.layers[l].layer_degenerate) continue;
                EXPECT_NEAR(again.layers[l].lambda_layer, 1.0f, 1e-4f) << "seed " << seed << " layer " << l;
                if (scheme == NormScheme::channel_norm) {
                    for (std::size_t c = 0; c < again.layers[l].lambda_chan.size(); ++c) {
                        const auto& deg = s.layers[l].degenerate_channels;
                        if (std::find(deg.begin(), deg.end(), c) != deg.end()) continue;
                        EXPECT_NEAR(again.layers[l].lambda_chan[c], 1.0f, 1e-4f);
                    }
                }
            }
        }
    }
}

TEST(Normalize, EqualChannelScalesReduceToLayerNorm) {
    const NetworkSpec net = fixtures::random_network(4);
    ActivationStats s = collect_stats(net, fixtures::random_inputs(net.input_shape, 10, 1), PercentileMode::max);
    for (auto& ls : s.layers) std::fill(ls.lambda_chan.begin(), ls.lambda_chan.end(), ls.lambda_layer);
    const NormalizedNetwork a = layer_norm(net, s);
    const NormalizedNetwork b = channel_norm(net, s);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        EXPECT_EQ(a.net.layers[l].weights, b.net.layers[l].weights);
        EXPECT_EQ(a.net.layers[l].bias, b.net.layers[l].bias);
    }
}

TEST(Normalize, DenormalizeScalesPerChannel) {
    NetworkSpec net = two_channel_net();
    ActivationStats s;
    s.layers = {LayerStats{1.0f, {1.0f, 0.5f}, false, {}}, LayerStats{3.0f, {3.0f}, false, {}}};
    const NormalizedNetwork n = channel_norm(net, s);
    const Tensor d = denormalize_output(Tensor({1, 1, 1}, 0.5f), n);
    EXPECT_FLOAT_EQ(d[0], 1.5f);
    EXPECT_THROW(denormalize_output(Tensor({2, 1, 1}, 0.5f), n), InputError);
}

TEST(Normalize, DenormalizedOutputMatchesOriginal) {
    const NetworkSpec net = fixtures::random_network(31);
    const auto calib = fixtures::random_inputs(net.input_shape, 30, 2);
    const auto eval = fixtures::random_inputs(net.input_shape, 100, 3);
    for (PercentileMode mode : {PercentileMode::max, PercentileMode::p99_9}) {
        const ActivationStats s = collect_stats(net, calib, mode);
        for (NormScheme scheme : {NormScheme::layer_norm, NormScheme::channel_norm}) {
            const NormalizedNetwork n = normalize(net, s, scheme);
            for (const auto& x : eval) {
                const Tensor ref = forward_output(net, x);
                const Tensor got = denormalize_output(forward_output(n.net, x), n);
                for (std::size_t i = 0; i < ref.size(); ++i) {
                    ASSERT_NEAR(got[i], ref[i], 1e-4f * (1.0f + std::abs(ref[i])));
                }
            }
        }
    }
}

TEST(Normalize, ChannelNormEvensOutChannelMaxima) {
    const auto fx = fixtures::skewed_fixture(1);
    const ActivationStats s = collect_stats(fx.net, fx.calibration, PercentileMode::max);
    const auto measure = [&](NormScheme scheme) {
        const NormalizedNetwork n = normalize(fx.net, s, scheme);
        return collect_stats(n.net, fx.calibration, PercentileMode::max).layers[fx.skewed_layer].lambda_chan;
    };
    const double cv_layer = coefficient_of_variation(measure(NormScheme::layer_norm));
    const double cv_chan = coefficient_of_variation(measure(NormScheme::channel_norm));
    EXPECT_LE(cv_chan, cv_layer);
    EXPECT_LT(cv_chan, 1e-4);
}

TEST(Normalize, MismatchedStatsRejected) {
    const NetworkSpec net = two_channel_net();
    ActivationStats s;
    s.layers = {LayerStats{1.0f, {1.0f}, false, {}}, LayerStats{1.0f, {1.0f}, false, {}}};
    EXPECT_THROW(layer_norm(net, s), InputError);
}

TEST(StatsIo, JsonRoundTrip) {
    const NetworkSpec net = fixtures::random_network(6);
    const ActivationStats s =
        collect_stats(net, fixtures::random_inputs(net.input_shape, 12, 4), PercentileMode::p99_9);
    testutil::TempDir dir("stats");
    save_stats(s, dir / "stats.json");
    const ActivationStats back = load_stats(dir / "stats.json");
    EXPECT_EQ(back.mode, s.mode);
    EXPECT_EQ(back.sample_count, s.sample_count);
    ASSERT_EQ(back.layers.size(), s.layers.size());
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        EXPECT_EQ(back.layers[l].lambda_layer, s.layers[l].lambda_layer);
        EXPECT_EQ(back.layers[l].lambda_chan, s.layers[l].lambda_chan);
        EXPECT_EQ(back.layers[l].degenerate_channels, s.layers[l].degenerate_channels);
    }
    EXPECT_EQ(stats_to_json(back), stats_to_json(s));
}
