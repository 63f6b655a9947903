// SPDX-License-Identifier: Apache-2.0
#include "snnconv/netspec.hpp"

#include "snnconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace snnconv {

namespace {

[[noreturn]] void layer_error(std::size_t index, const std::string& what) {
    throw InputError("netspec", "layer " + std::to_string(index) + ": " + what);
}

void check_size(std::size_t index, const char* what, std::size_t got, std::size_t want) {
    if (got != want) {
        layer_error(index, std::string(what) + " has " + std::to_string(got) +
                               " values, expected " + std::to_string(want));
    }
}

} // namespace

std::string to_string(LayerKind k) {
    switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::maxpool2d: return "maxpool2d";
    }
    return "?";
}

std::string to_string(Padding p) { return p == Padding::same ? "same" : "valid"; }

std::string to_string(Activation a) { return a == Activation::leaky_relu ? "leaky_relu" : "none"; }

LayerKind parse_layer_kind(const std::string& s) {
    if (s == "conv2d" || s == "conv") return LayerKind::conv2d;
    if (s == "dense") return LayerKind::dense;
    if (s == "maxpool2d" || s == "maxpool") return LayerKind::maxpool2d;
    throw InputError("netspec", "unknown layer kind '" + s + "'");
}

Padding parse_padding(const std::string& s) {
    if (s == "same") return Padding::same;
    if (s == "valid") return Padding::valid;
    throw InputError("netspec", "unknown padding '" + s + "' (expected same or valid)");
}

Activation parse_activation(const std::string& s) {
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "none" || s == "linear") return Activation::none;
    throw InputError("netspec", "unknown activation '" + s + "'");
}

std::size_t LayerSpec::fan_in() const noexcept {
    switch (kind) {
    case LayerKind::conv2d: return in_shape.channels * kernel * kernel;
    case LayerKind::dense: return in_shape.size();
    case LayerKind::maxpool2d: return 0;
    }
    return 0;
}

AxisWindow axis_window(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
    if (padding == Padding::valid) {
        if (in < kernel) {
            return {0, 0};
        }
        return {(in - kernel) / stride + 1, 0};
    }
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t span = (out - 1) * stride + kernel;
    const std::size_t pad_total = span > in ? span - in : 0;
    return {out, pad_total / 2};
}

Shape3 output_shape_for(const LayerSpec& L, const Shape3& in) {
    switch (L.kind) {
    case LayerKind::dense:
        return {L.out_channels, 1, 1};
    case LayerKind::conv2d:
    case LayerKind::maxpool2d: {
        const auto wy = axis_window(in.height, L.kernel, L.stride, L.padding);
        const auto wx = axis_window(in.width, L.kernel, L.stride, L.padding);
        const std::size_t ch = L.kind == LayerKind::conv2d ? L.out_channels : in.channels;
        return {ch, wy.out, wx.out};
    }
    }
    return {};
}

void NetworkSpec::resolve() {
    if (input_shape.size() == 0) {
        throw InputError("netspec", "input_shape must be non-empty");
    }
    if (!(alpha > 0.0f && alpha <= 1.0f)) {
        throw InputError("netspec", "alpha must lie in (0, 1], got " + std::to_string(alpha));
    }
    if (layers.empty()) {
        throw InputError("netspec", "network has no layers");
    }

    Shape3 in = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        LayerSpec& L = layers[i];
        L.in_shape = in;
        if (L.stride == 0 || L.kernel == 0) {
            layer_error(i, "kernel and stride must be positive");
        }
        switch (L.kind) {
        case LayerKind::conv2d: {
            if (L.out_channels == 0) layer_error(i, "out_ch must be positive");
            const auto wy = axis_window(in.height, L.kernel, L.stride, L.padding);
            const auto wx = axis_window(in.width, L.kernel, L.stride, L.padding);
            if (wy.out == 0 || wx.out == 0) {
                layer_error(i, "kernel " + std::to_string(L.kernel) + " larger than input " +
                                   in.to_string());
            }
            L.out_shape = {L.out_channels, wy.out, wx.out};
            break;
        }
        case LayerKind::dense:
            if (L.out_channels == 0) layer_error(i, "out_ch must be positive");
            L.out_shape = {L.out_channels, 1, 1};
            break;
        case LayerKind::maxpool2d: {
            if (L.out_channels != 0 && L.out_channels != in.channels) {
                layer_error(i, "maxpool out_ch " + std::to_string(L.out_channels) +
                                   " differs from input channels " + std::to_string(in.channels));
            }
            L.out_channels = in.channels;
            if (!L.weights.empty() || !L.bias.empty() || L.batchnorm) {
                layer_error(i, "maxpool layers carry no weights, bias or batchnorm");
            }
            if (L.activation != Activation::none) {
                layer_error(i, "maxpool layers take no activation");
            }
            const auto wy = axis_window(in.height, L.kernel, L.stride, L.padding);
            const auto wx = axis_window(in.width, L.kernel, L.stride, L.padding);
            if (wy.out == 0 || wx.out == 0) {
                layer_error(i, "pool window larger than input " + in.to_string());
            }
            L.out_shape = {in.channels, wy.out, wx.out};
            break;
        }
        }

        if (L.has_weights()) {
            check_size(i, "weights", L.weights.size(), L.weight_count());
            check_size(i, "bias", L.bias.size(), L.out_channels);
            if (L.batchnorm) {
                const BatchNorm& bn = *L.batchnorm;
                check_size(i, "batchnorm gamma", bn.gamma.size(), L.out_channels);
                check_size(i, "batchnorm beta", bn.beta.size(), L.out_channels);
                check_size(i, "batchnorm mean", bn.mean.size(), L.out_channels);
                check_size(i, "batchnorm variance", bn.variance.size(), L.out_channels);
                if (bn.epsilon < 0.0f) layer_error(i, "batchnorm epsilon must be non-negative");
                for (float v : bn.variance) {
                    if (!(v >= 0.0f)) layer_error(i, "batchnorm variance must be non-negative");
                    if (v + bn.epsilon <= 0.0f) {
                        layer_error(i, "batchnorm variance + epsilon must be positive");
                    }
                }
            }
        }
        in = L.out_shape;
    }

    const LayerSpec& last = layers.back();
    if (!last.has_weights() || last.activation != Activation::none) {
        throw InputError("netspec", "layer " + std::to_string(layers.size() - 1) +
                                        ": final layer must be a linear-output conv2d or dense layer");
    }
}

Tensor layer_preactivation(const LayerSpec& L, const Tensor& input) {
    const Shape3 in = L.in_shape;
    const Shape3 out = L.out_shape;
    if (input.size() != in.size()) {
        throw InputError("netspec", "input of size " + std::to_string(input.size()) +
                                        " does not match layer input shape " + in.to_string());
    }
    Tensor result = Tensor::of(out);
    const auto x = input.data();
    auto y = result.data();

    switch (L.kind) {
    case LayerKind::conv2d: {
        const std::size_t k = L.kernel;
        const auto pad_y = axis_window(in.height, k, L.stride, L.padding).pad_before;
        const auto pad_x = axis_window(in.width, k, L.stride, L.padding).pad_before;
        for (std::size_t o = 0; o < out.channels; ++o) {
            for (std::size_t oy = 0; oy < out.height; ++oy) {
                for (std::size_t ox = 0; ox < out.width; ++ox) {
                    double acc = L.bias[o];
                    for (std::size_t c = 0; c < in.channels; ++c) {
                        const float* w = &L.weights[((o * in.channels + c) * k) * k];
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * L.stride + ky) -
                                                      static_cast<std::ptrdiff_t>(pad_y);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * L.stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad_x);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                                acc += static_cast<double>(w[ky * k + kx]) *
                                       x[(c * in.height + static_cast<std::size_t>(iy)) * in.width +
                                         static_cast<std::size_t>(ix)];
                            }
                        }
                    }
                    y[(o * out.height + oy) * out.width + ox] = static_cast<float>(acc);
                }
            }
        }
        break;
    }
    case LayerKind::dense: {
        const std::size_t n = in.size();
        for (std::size_t o = 0; o < out.channels; ++o) {
            double acc = L.bias[o];
            const float* w = &L.weights[o * n];
            for (std::size_t i = 0; i < n; ++i) {
                acc += static_cast<double>(w[i]) * x[i];
            }
            y[o] = static_cast<float>(acc);
        }
        break;
    }
    case LayerKind::maxpool2d: {
        const std::size_t k = L.kernel;
        const auto pad_y = axis_window(in.height, k, L.stride, L.padding).pad_before;
        const auto pad_x = axis_window(in.width, k, L.stride, L.padding).pad_before;
        for (std::size_t c = 0; c < out.channels; ++c) {
            for (std::size_t oy = 0; oy < out.height; ++oy) {
                for (std::size_t ox = 0; ox < out.width; ++ox) {
                    float best = -std::numeric_limits<float>::infinity();
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * L.stride + ky) -
                                                  static_cast<std::ptrdiff_t>(pad_y);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * L.stride + kx) -
                                                      static_cast<std::ptrdiff_t>(pad_x);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                            best = std::max(best, x[(c * in.height + static_cast<std::size_t>(iy)) *
                                                        in.width +
                                                    static_cast<std::size_t>(ix)]);
                        }
                    }
                    y[(c * out.height + oy) * out.width + ox] = best;
                }
            }
        }
        break;
    }
    }

    if (L.batchnorm) {
        const BatchNorm& bn = *L.batchnorm;
        const std::size_t plane = out.plane();
        for (std::size_t o = 0; o < out.channels; ++o) {
            const double scale = bn.gamma[o] / std::sqrt(static_cast<double>(bn.variance[o]) + bn.epsilon);
            for (std::size_t p = 0; p < plane; ++p) {
                float& v = y[o * plane + p];
                v = static_cast<float>((static_cast<double>(v) - bn.mean[o]) * scale + bn.beta[o]);
            }
        }
    }
    return result;
}

std::vector<Tensor> forward(const NetworkSpec& net, const Tensor& input) {
    if (input.size() != net.input_shape.size()) {
        throw InputError("netspec", "input has " + std::to_string(input.size()) +
                                        " values, network expects " + net.input_shape.to_string());
    }
    std::vector<Tensor> acts;
    acts.reserve(net.layers.size());
    const Tensor* x = &input;
    for (const LayerSpec& L : net.layers) {
        Tensor y = layer_preactivation(L, *x);
        if (L.activation == Activation::leaky_relu) {
            for (float& v : y.data()) v = leaky_relu(v, net.alpha);
        }
        acts.push_back(std::move(y));
        x = &acts.back();
    }
    return acts;
}

Tensor forward_output(const NetworkSpec& net, const Tensor& input) {
    return std::move(forward(net, input).back());
}

NetworkSpec fold_batchnorm(const NetworkSpec& net) {
    NetworkSpec folded = net;
    for (LayerSpec& L : folded.layers) {
        if (!L.batchnorm) continue;
        const BatchNorm& bn = *L.batchnorm;
        const std::size_t fan_in = L.fan_in();
        for (std::size_t o = 0; o < L.out_channels; ++o) {
            const double scale = bn.gamma[o] / std::sqrt(static_cast<double>(bn.variance[o]) + bn.epsilon);
            for (std::size_t i = 0; i < fan_in; ++i) {
                L.weights[o * fan_in + i] = static_cast<float>(L.weights[o * fan_in + i] * scale);
            }
            L.bias[o] = static_cast<float>((static_cast<double>(L.bias[o]) - bn.mean[o]) * scale + bn.beta[o]);
        }
        L.batchnorm.reset();
    }
    return folded;
}

} // namespace snnconv
