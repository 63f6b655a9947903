// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/calibrate.hpp"
#include "snnconv/decode.hpp"
#include "snnconv/spikesim.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snnconv {

struct LayerRates {
    std::vector<float> activity;  // (pos + neg) / T
    std::vector<float> signed_rate;  // (pos - neg) / T
};

std::vector<LayerRates> firing_rates(const SimulationState& state, std::size_t T);

struct ChannelRate {
    float mean = 0.0f;
    float min = 0.0f;
    float max = 0.0f;
};

struct LayerFiring {
    std::vector<ChannelRate> channels;
    std::vector<std::size_t> histogram;  // activity-rate bins over [0, 1]
    std::size_t neurons = 0;
};

struct FiringReportOptions {
    double bin_width = 0.005;
    std::size_t raster_layer = 0;
    std::size_t raster_channel = 0;
    std::size_t raster_neurons = 20;
};

struct FiringReport {
    std::size_t T = 0;
    double bin_width = 0.005;
    std::vector<LayerFiring> layers;
    std::vector<SpikeEvent> raster;  // needs a trace of raster_layer
    std::vector<std::uint32_t> raster_sampled;
    std::size_t raster_layer = 0;
    std::size_t raster_channel = 0;
};

// Neurons sampled for the raster: the first `count` of channel `channel`.
std::vector<std::uint32_t> raster_neurons(const Shape3& shape, std::size_t channel, std::size_t count);

FiringReport firing_report(const SpikingNetwork& net, const SimulationState& state,
                           const FiringReportOptions& opts = {});

// Fraction of `layer`'s neurons whose activity rate is below `threshold`.
double fraction_below(const SimulationState& state, std::size_t layer, double threshold);

std::string firing_report_to_json(const FiringReport& report);
std::string histogram_to_csv(const FiringReport& report);

struct LayerProfile {
    std::vector<float> normalized;  // per channel lambda_chan / scale
    float mean = 0.0f;
    float min = 0.0f;
};

// Per-channel normalized maxima: lambda_chan / lambda_layer under layer norm, all ones under channel norm.
std::vector<LayerProfile> channel_activation_profile(const ActivationStats& stats, NormScheme scheme);
std::string profile_to_json(const std::vector<LayerProfile>& profile, NormScheme scheme);

struct ConvergencePoint {
    std::size_t T = 0;
    double mae = 0.0;
};

struct ConvergenceSeries {
    std::string label;
    std::vector<ConvergencePoint> points;
    std::optional<std::size_t> t_reach;  // first T with mae <= target
};

struct ConvergenceOptions {
    ConversionOptions conversion;
    DecodeScheme decode = DecodeScheme::v_mem;
    double target_error = 0.02;
};

struct ConvergenceReport {
    double target_error = 0.02;
    std::vector<ConvergenceSeries> series;
};

// Mean absolute error of the denormalized decoded output against the original
// network's forward pass, averaged over `inputs`, at every T in `t_list`.
ConvergenceSeries convergence_series(const NetworkSpec& original, const NormalizedNetwork& normnet,
                                     std::span<const Tensor> inputs, std::span<const std::size_t> t_list,
                                     const ConvergenceOptions& opts, std::string label);

ConvergenceReport convergence_curve(const NetworkSpec& original, const NormalizedNetwork& a,
                                    const NormalizedNetwork& b, std::span<const Tensor> inputs,
                                    std::span<const std::size_t> t_list, const ConvergenceOptions& opts = {});

std::string convergence_to_json(const ConvergenceReport& report);

double mean_absolute_error(const Tensor& a, const Tensor& b);

} // namespace snnconv
