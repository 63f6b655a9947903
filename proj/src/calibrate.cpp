// SPDX-License-Identifier: Apache-2.0
#include "snnconv/calibrate.hpp"

#include "snnconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

namespace snnconv {

using nlohmann::json;

std::string to_string(PercentileMode m) { return m == PercentileMode::max ? "max" : "p99.9"; }

std::string to_string(NormScheme s) { return s == NormScheme::layer_norm ? "layer" : "channel"; }

PercentileMode parse_percentile_mode(const std::string& s) {
    if (s == "max") return PercentileMode::max;
    if (s == "p99.9" || s == "p999" || s == "percentile") return PercentileMode::p99_9;
    throw InputError("calibrate", "unknown percentile mode '" + s + "' (expected max or p99.9)");
}

NormScheme parse_norm_scheme(const std::string& s) {
    if (s == "layer" || s == "layer_norm") return NormScheme::layer_norm;
    if (s == "channel" || s == "channel_norm") return NormScheme::channel_norm;
    throw InputError("calibrate", "unknown normalization scheme '" + s + "' (expected layer or channel)");
}

float nearest_rank_percentile(std::vector<float> values, double pct) {
    if (values.empty()) {
        return 0.0f;
    }
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(values.begin(), nth, values.end());
    return *nth;
}

namespace {

constexpr double kPercentile = 99.9;

// Per-channel accumulator; keeps raw samples only in percentile mode.
struct ChannelAccumulator {
    float max = 0.0f;
    std::vector<float> samples;
};

float floor_lambda(float v, bool& degenerate) {
    degenerate = !(v > kLambdaFloor);
    return degenerate ? kLambdaFloor : v;
}

} // namespace

ActivationStats stats_from_activations(const NetworkSpec& net,
                                       std::span<const std::vector<Tensor>> activations,
                                       PercentileMode mode) {
    if (activations.empty()) {
        throw InputError("calibrate", "calibration set is empty");
    }
    const std::size_t n_layers = net.layers.size();
    std::vector<std::vector<ChannelAccumulator>> acc(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        acc[l].resize(net.layers[l].out_shape.channels);
    }

    for (const auto& acts : activations) {
        if (acts.size() != n_layers) {
            throw InputError("calibrate", "activation set has " + std::to_string(acts.size()) +
                                              " layers, network has " + std::to_string(n_layers));
        }
        for (std::size_t l = 0; l < n_layers; ++l) {
            const LayerSpec& L = net.layers[l];
            const bool magnitude = L.has_weights() && L.activation == Activation::none;
            const std::size_t plane = L.out_shape.plane();
            const auto data = acts[l].data();
            for (std::size_t c = 0; c < L.out_shape.channels; ++c) {
                ChannelAccumulator& a = acc[l][c];
                for (std::size_t p = 0; p < plane; ++p) {
                    float v = data[c * plane + p];
                    if (magnitude) v = std::fabs(v);
                    if (!(v > 0.0f)) continue;
                    a.max = std::max(a.max, v);
                    if (mode == PercentileMode::p99_9) a.samples.push_back(v);
                }
            }
        }
    }

    ActivationStats stats;
    stats.mode = mode;
    stats.sample_count = activations.size();
    stats.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        LayerStats& ls = stats.layers[l];
        float layer_raw = 0.0f;
        std::vector<float> pooled;
        for (std::size_t c = 0; c < acc[l].size(); ++c) {
            ChannelAccumulator& a = acc[l][c];
            float raw = a.max;
            if (mode == PercentileMode::p99_9) {
                pooled.insert(pooled.end(), a.samples.begin(), a.samples.end());
                raw = nearest_rank_percentile(std::move(a.samples), kPercentile);
            } else {
                layer_raw = std::max(layer_raw, raw);
            }
            bool degenerate = false;
            ls.lambda_chan.push_back(floor_lambda(raw, degenerate));
            if (degenerate) ls.degenerate_channels.push_back(c);
        }
        if (mode == PercentileMode::p99_9) {
            layer_raw = nearest_rank_percentile(std::move(pooled), kPercentile);
        }
        ls.lambda_layer = floor_lambda(layer_raw, ls.layer_degenerate);
    }
    return stats;
}

ActivationStats collect_stats(const NetworkSpec& net, std::span<const Tensor> calib_inputs,
                              PercentileMode mode) {
    if (calib_inputs.empty()) {
        throw InputError("calibrate", "calibration set is empty");
    }
    for (const LayerSpec& L : net.layers) {
        if (L.batchnorm) {
            throw InputError("calibrate", "network must be batchnorm-folded before calibration");
        }
    }
    std::vector<std::vector<Tensor>> acts;
    acts.reserve(calib_inputs.size());
    for (const Tensor& x : calib_inputs) {
        acts.push_back(forward(net, x));
    }
    return stats_from_activations(net, acts, mode);
}

namespace {

void check_stats_match(const NetworkSpec& net, const ActivationStats& stats) {
    if (stats.layers.size() != net.layers.size()) {
        throw InputError("calibrate", "stats describe " + std::to_string(stats.layers.size()) +
                                          " layers, network has " + std::to_string(net.layers.size()));
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (stats.layers[l].lambda_chan.size() != net.layers[l].out_shape.channels) {
            throw InputError("calibrate", "stats layer " + std::to_string(l) + " has " +
                                              std::to_string(stats.layers[l].lambda_chan.size()) +
                                              " channels, network layer has " +
                                              std::to_string(net.layers[l].out_shape.channels));
        }
        if (!(stats.layers[l].lambda_layer > 0.0f)) {
            throw InputError("calibrate", "stats layer " + std::to_string(l) + " has non-positive lambda");
        }
        for (float v : stats.layers[l].lambda_chan) {
            if (!(v > 0.0f)) {
                throw InputError("calibrate", "stats layer " + std::to_string(l) +
                                                  " has a non-positive channel lambda");
            }
        }
    }
}

// Applies w[o, i] *= in_scale[channel(i)] / out_scale[o], b[o] /= out_scale[o].
NormalizedNetwork rescale(const NetworkSpec& net, const ActivationStats& stats, NormScheme scheme,
                          float input_scale) {
    if (!(input_scale > 0.0f)) {
        throw InputError("calibrate", "input scale must be positive");
    }
    check_stats_match(net, stats);
    for (const LayerSpec& L : net.layers) {
        if (L.batchnorm) {
            throw InputError("calibrate", "network must be batchnorm-folded before normalization");
        }
    }

    NormalizedNetwork result;
    result.net = net;
    result.scheme = scheme;
    result.stats = stats;
    result.input_scale = input_scale;

    std::vector<float> prev(net.input_shape.channels, input_scale);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        LayerSpec& L = result.net.layers[l];
        if (!L.has_weights()) {
            // max(c * x) == c * max(x) for c > 0: pooling keeps its input's scale.
            continue;
        }
        const LayerStats& ls = stats.layers[l];
        std::vector<float> cur = scheme == NormScheme::layer_norm
                                     ? std::vector<float>(L.out_channels, ls.lambda_layer)
                                     : ls.lambda_chan;
        const std::size_t fan_in = L.fan_in();
        const std::size_t per_in_channel =
            L.kind == LayerKind::conv2d ? L.kernel * L.kernel : L.in_shape.plane();
        for (std::size_t o = 0; o < L.out_channels; ++o) {
            for (std::size_t i = 0; i < fan_in; ++i) {
                const std::size_t c = i / per_in_channel;
                L.weights[o * fan_in + i] *= prev[c] / cur[o];
            }
            L.bias[o] /= cur[o];
        }
        prev = std::move(cur);
    }
    result.output_scale = prev;
    return result;
}

} // namespace

NormalizedNetwork layer_norm(const NetworkSpec& net, const ActivationStats& stats, float input_scale) {
    return rescale(net, stats, NormScheme::layer_norm, input_scale);
}

NormalizedNetwork channel_norm(const NetworkSpec& net, const ActivationStats& stats, float input_scale) {
    return rescale(net, stats, NormScheme::channel_norm, input_scale);
}

NormalizedNetwork normalize(const NetworkSpec& net, const ActivationStats& stats, NormScheme scheme,
                            float input_scale) {
    return rescale(net, stats, scheme, input_scale);
}

Tensor denormalize_output(const Tensor& out, const NormalizedNetwork& normnet) {
    const Shape3 s = normnet.net.output_shape();
    if (out.size() != s.size()) {
        throw InputError("calibrate", "output of size " + std::to_string(out.size()) +
                                          " does not match final layer shape " + s.to_string());
    }
    Tensor result = out;
    const std::size_t plane = s.plane();
    for (std::size_t c = 0; c < s.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            result[c * plane + p] *= normnet.output_scale[c];
        }
    }
    return result;
}

std::string stats_to_json(const ActivationStats& stats) {
    json j;
    j["mode"] = to_string(stats.mode);
    j["sample_count"] = stats.sample_count;
    j["layers"] = json::array();
    for (const LayerStats& ls : stats.layers) {
        j["layers"].push_back({{"lambda_layer", ls.lambda_layer},
                               {"lambda_chan", ls.lambda_chan},
                               {"layer_degenerate", ls.layer_degenerate},
                               {"degenerate_channels", ls.degenerate_channels}});
    }
    return j.dump(2) + "\n";
}

void save_stats(const ActivationStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("calibrate", "cannot write " + path.string());
    }
    out << stats_to_json(stats);
}

ActivationStats load_stats(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("calibrate", "cannot open stats file " + path.string());
    }
    try {
        const json j = json::parse(in);
        ActivationStats stats;
        stats.mode = parse_percentile_mode(j.at("mode").get<std::string>());
        stats.sample_count = j.at("sample_count").get<std::size_t>();
        if (stats.sample_count == 0) {
            throw InputError("calibrate", "stats file " + path.string() + " has sample_count 0");
        }
        for (const json& lj : j.at("layers")) {
            LayerStats ls;
            ls.lambda_layer = lj.at("lambda_layer").get<float>();
            ls.lambda_chan = lj.at("lambda_chan").get<std::vector<float>>();
            ls.layer_degenerate = lj.value("layer_degenerate", false);
            ls.degenerate_channels = lj.value("degenerate_channels", std::vector<std::size_t>{});
            stats.layers.push_back(std::move(ls));
        }
        return stats;
    } catch (const json::exception& e) {
        throw InputError("calibrate", "malformed stats file " + path.string() + ": " + e.what());
    }
}

} // namespace snnconv
