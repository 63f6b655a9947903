// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/calibrate.hpp"
#include "snnconv/netspec.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace snnconv {

// Relative slack on threshold comparisons. Absorbs float32 rounding of input
// currents so that e.g. ten ticks of 0.7 reach exactly seven spikes.
inline constexpr double kThresholdTolerance = 1e-6;

// Signed integrate-and-fire neuron with imbalanced threshold: the negative
// threshold is -v_th_pos / alpha, so negative input is transmitted at alpha
// times the rate of positive input.
struct NeuronConfig {
    double v_th_pos = 1.0;
    double alpha = 1.0;
    bool signed_neuron = true;

    double v_th_neg() const noexcept { return -v_th_pos / alpha; }

    // Throws InputError unless v_th_pos > 0 and alpha > 0.
    static NeuronConfig make(double v_th_pos, double alpha, bool signed_neuron);
};

// Integrates z into v_mem and fires at most one spike (reset by subtraction).
// Returns +1, -1 or 0.
int step_neuron(double& v_mem, double z, const NeuronConfig& cfg) noexcept;

struct SpikingLayer {
    LayerKind kind = LayerKind::conv2d;
    Shape3 in_shape;
    Shape3 out_shape;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    Padding padding = Padding::valid;
    std::vector<float> weights;
    std::vector<float> bias;
    NeuronConfig neuron;
    bool is_output = false;

    std::size_t size() const noexcept { return out_shape.size(); }
};

struct SpikingNetwork {
    Shape3 input_shape;
    float input_scale = 1.0f;
    std::vector<SpikingLayer> layers;
    std::vector<float> output_scale;
    // Output layer integrates without firing; decoding reads v_mem only.
    bool accumulate_output = false;

    const SpikingLayer& output_layer() const { return layers.back(); }
};

struct ConversionOptions {
    double v_th = 1.0;
    bool signed_neurons = true;
    bool accumulate_output = false;
};

// Builds the spiking network from a normalized DNN. Hidden weighted layers get
// weights and biases multiplied by v_th so their spike rate equals the
// normalized activation for any threshold; the output layer keeps the
// normalized weights and is decoded as an accumulator.
SpikingNetwork convert(const NormalizedNetwork& normnet, const ConversionOptions& opts = {});

// z = bias + sum of weights of incoming signed spikes. Event driven: only
// non-zero spikes touch their fan-out. Returns the number of accumulations.
std::uint64_t synaptic_input(const SpikingLayer& layer, std::span<const std::int8_t> incoming,
                             std::span<double> z);

// Constant analog input current: image / input_scale, validated to lie in [0, 1].
std::vector<double> encode_input(const Tensor& image, float input_scale = 1.0f);

// Each output forwards the spike of the window input with the largest signed
// spike count so far (`prior_counts`, excluding this tick); ties pick the lowest index.
void spike_maxpool(const SpikingLayer& layer, std::span<const std::int8_t> incoming,
                   std::span<const std::int64_t> prior_counts, std::span<std::int8_t> out);

struct LayerState {
    std::vector<double> v_mem;  // empty for max-pool layers
    std::vector<std::uint32_t> spikes_pos;
    std::vector<std::uint32_t> spikes_neg;
};

struct SpikeEvent {
    std::uint32_t t = 0;  // 1-based tick
    std::uint32_t layer = 0;
    std::uint32_t neuron = 0;
    std::int8_t sign = 0;

    bool operator==(const SpikeEvent&) const = default;
};

struct SimulationState {
    std::size_t t = 0;
    std::vector<LayerState> layers;
    std::vector<SpikeEvent> trace;
    // Instrumentation: accumulations actually executed.
    std::uint64_t synaptic_acs = 0;
    std::uint64_t bias_acs = 0;
    std::uint64_t encoder_macs = 0;
};

struct RecordOptions {
    bool trace = false;
    std::vector<std::size_t> trace_layers;  // empty: every layer
};

// Clock-driven simulator. Each tick advances every layer in order; layer l
// consumes the spikes layer l-1 emitted in the same tick.
class Simulator {
public:
    Simulator(const SpikingNetwork& net, const Tensor& image, RecordOptions record = {});

    void step();
    void advance_to(std::size_t t);

    const SimulationState& state() const noexcept { return state_; }
    SimulationState take_state() && { return std::move(state_); }

private:
    bool traced(std::size_t layer) const;

    const SpikingNetwork* net_;
    RecordOptions record_;
    std::vector<double> input_current_;
    std::vector<std::vector<std::int8_t>> spikes_;
    std::vector<std::vector<std::int64_t>> net_counts_;
    std::vector<double> z_;
    SimulationState state_;
};

SimulationState run(const SpikingNetwork& net, const Tensor& image, std::size_t T,
                    const RecordOptions& record = {});

std::string trace_to_csv(std::span<const SpikeEvent> events);
void write_trace_csv(std::span<const SpikeEvent> events, const std::filesystem::path& path);

} // namespace snnconv
