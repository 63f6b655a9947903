// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/netspec.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace snnconv {

enum class PercentileMode { max, p99_9 };
enum class NormScheme { layer_norm, channel_norm };

std::string to_string(PercentileMode m);
std::string to_string(NormScheme s);
PercentileMode parse_percentile_mode(const std::string& s);
NormScheme parse_norm_scheme(const std::string& s);

// Scales at or below this are treated as silent and clamped to it.
inline constexpr float kLambdaFloor = 1e-6f;

struct LayerStats {
    float lambda_layer = kLambdaFloor;
    std::vector<float> lambda_chan;
    bool layer_degenerate = false;
    std::vector<std::size_t> degenerate_channels;
};

// Activation scales per layer and per channel. Hidden layers use the strictly
// positive activations; linear-output layers use activation magnitudes.
struct ActivationStats {
    PercentileMode mode = PercentileMode::max;
    std::size_t sample_count = 0;
    std::vector<LayerStats> layers;
};

// Nearest-rank percentile (pct in (0, 100]) of `values`; 0 for an empty set.
float nearest_rank_percentile(std::vector<float> values, double pct);

ActivationStats collect_stats(const NetworkSpec& net, std::span<const Tensor> calib_inputs,
                              PercentileMode mode);

// Same, from activations already produced by forward() (one vector per input).
ActivationStats stats_from_activations(const NetworkSpec& net,
                                       std::span<const std::vector<Tensor>> activations,
                                       PercentileMode mode);

struct NormalizedNetwork {
    NetworkSpec net;
    NormScheme scheme = NormScheme::layer_norm;
    ActivationStats stats;
    float input_scale = 1.0f;
    // Per output channel; all entries equal under layer_norm.
    std::vector<float> output_scale;
};

// Rescales weights by the predecessor/current per-layer maxima. Max-pool layers
// inherit their predecessor's scale. `input_scale` is the scale of the input image.
NormalizedNetwork layer_norm(const NetworkSpec& net, const ActivationStats& stats,
                             float input_scale = 1.0f);

// Same with an independent scale for every channel: w[i,j] * lambda_prev[i] / lambda[j].
NormalizedNetwork channel_norm(const NetworkSpec& net, const ActivationStats& stats,
                               float input_scale = 1.0f);

NormalizedNetwork normalize(const NetworkSpec& net, const ActivationStats& stats, NormScheme scheme,
                            float input_scale = 1.0f);

Tensor denormalize_output(const Tensor& out, const NormalizedNetwork& normnet);

void save_stats(const ActivationStats& stats, const std::filesystem::path& path);
ActivationStats load_stats(const std::filesystem::path& path);
std::string stats_to_json(const ActivationStats& stats);

} // namespace snnconv
