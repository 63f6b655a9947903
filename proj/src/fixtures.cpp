// SPDX-License-Identifier: Apache-2.0
#include "snnconv/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace snnconv::fixtures {

namespace {

void fill_normal(std::vector<float>& v, std::size_t n, float stddev, std::mt19937_64& rng) {
    std::normal_distribution<float> dist(0.0f, stddev);
    v.resize(n);
    for (float& x : v) x = dist(rng);
}

void add_weights(LayerSpec& L, const Shape3& in, std::mt19937_64& rng, float bias_scale) {
    L.in_shape = in;
    const std::size_t fan_in = L.fan_in();
    fill_normal(L.weights, L.weight_count(), 1.5f / std::sqrt(static_cast<float>(fan_in)), rng);
    fill_normal(L.bias, L.out_channels, bias_scale, rng);
}

} // namespace

NetworkSpec random_network(std::uint64_t seed, const RandomNetOptions& opts) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> n_layers(opts.min_layers, std::max(opts.min_layers, opts.max_layers));
    std::uniform_int_distribution<std::size_t> channels(2, std::max<std::size_t>(2, opts.max_channels));
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);

    NetworkSpec net;
    net.input_shape = opts.input_shape;
    net.alpha = opts.alpha;
    const std::size_t weighted = n_layers(rng);
    Shape3 in = net.input_shape;
    bool pooled = false;
    for (std::size_t l = 0; l + 1 < weighted; ++l) {
        LayerSpec L;
        L.kind = LayerKind::conv2d;
        L.out_channels = channels(rng);
        L.kernel = in.height >= 3 && in.width >= 3 ? 3 : 1;
        L.padding = unit(rng) < 0.5f ? Padding::same : Padding::valid;
        L.activation = Activation::leaky_relu;
        add_weights(L, in, rng, 0.1f);
        if (opts.batchnorm) {
            BatchNorm bn;
            std::uniform_real_distribution<float> gamma(0.5f, 1.5f), var(0.25f, 2.0f), mean(-0.3f, 0.3f);
            for (std::size_t o = 0; o < L.out_channels; ++o) {
                bn.gamma.push_back(gamma(rng));
                bn.beta.push_back(mean(rng));
                bn.mean.push_back(mean(rng));
                bn.variance.push_back(var(rng));
            }
            L.batchnorm = std::move(bn);
        }
        in = output_shape_for(L, in);
        net.layers.push_back(std::move(L));

        if (opts.maxpool && !pooled && in.height >= 4 && in.width >= 4 && unit(rng) < 0.5f) {
            LayerSpec P;
            P.kind = LayerKind::maxpool2d;
            P.kernel = 2;
            P.stride = 2;
            P.activation = Activation::none;
            in = output_shape_for(P, in);
            net.layers.push_back(std::move(P));
            pooled = true;
        }
    }
    LayerSpec head;
    head.kind = LayerKind::dense;
    head.out_channels = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    head.activation = Activation::none;
    add_weights(head, in, rng, 0.1f);
    net.layers.push_back(std::move(head));
    net.resolve();
    return net;
}

std::vector<Tensor> random_inputs(const Shape3& shape, std::size_t count, std::uint64_t seed, float lo, float hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<Tensor> out;
    for (std::size_t n = 0; n < count; ++n) {
        Tensor t = Tensor::of(shape);
        for (float& v : t.data()) v = dist(rng);
        out.push_back(std::move(t));
    }
    return out;
}

SkewedFixture skewed_fixture(std::uint64_t seed, std::size_t calibration_count, std::size_t evaluation_count) {
    std::mt19937_64 rng(seed);
    SkewedFixture fx;
    NetworkSpec& net = fx.net;
    net.input_shape = {2, 6, 6};
    net.alpha = 0.01f;

    constexpr std::size_t kChannels = 4;
    fx.skewed_channel = kChannels - 1;

    LayerSpec conv;
    conv.kind = LayerKind::conv2d;
    conv.out_channels = kChannels;
    conv.kernel = 3;
    conv.padding = Padding::same;
    conv.activation = Activation::leaky_relu;
    conv.in_shape = net.input_shape;
    {
        // Mostly excitatory kernels so the feature maps carry positive activity.
        std::uniform_real_distribution<float> w(-0.1f, 0.3f);
        conv.weights.resize(conv.weight_count());
        for (float& v : conv.weights) v = w(rng);
        conv.bias.assign(kChannels, 0.05f);
        const std::size_t per_out = conv.fan_in();
        for (std::size_t i = 0; i < per_out; ++i) conv.weights[fx.skewed_channel * per_out + i] *= fx.skew;
        conv.bias[fx.skewed_channel] *= fx.skew;
    }
    const Shape3 conv_out = output_shape_for(conv, net.input_shape);
    net.layers.push_back(conv);

    LayerSpec pool;
    pool.kind = LayerKind::maxpool2d;
    pool.kernel = 2;
    pool.stride = 2;
    pool.activation = Activation::none;
    const Shape3 pool_out = output_shape_for(pool, conv_out);
    net.layers.push_back(pool);

    LayerSpec head;
    head.kind = LayerKind::dense;
    head.out_channels = 3;
    head.activation = Activation::none;
    head.in_shape = pool_out;
    {
        std::normal_distribution<float> w(0.0f, 0.25f / std::sqrt(static_cast<float>(pool_out.size())));
        head.weights.resize(head.out_channels * pool_out.size());
        for (float& v : head.weights) v = w(rng);
        const std::size_t plane = pool_out.plane();
        for (std::size_t o = 0; o < head.out_channels; ++o) {
            for (std::size_t p = 0; p < plane; ++p) {
                head.weights[o * pool_out.size() + fx.skewed_channel * plane + p] /= fx.skew;
            }
        }
        head.bias.assign(head.out_channels, 0.0f);
    }
    net.layers.push_back(head);
    net.resolve();

    fx.calibration = random_inputs(net.input_shape, calibration_count, seed * 7919 + 1);
    fx.evaluation = random_inputs(net.input_shape, evaluation_count, seed * 7919 + 2);
    return fx;
}

} // namespace snnconv::fixtures
