// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/spikesim.hpp"

#include <filesystem>
#include <string>

namespace snnconv {

enum class DecodeScheme { spike_count, v_mem };

std::string to_string(DecodeScheme s);
DecodeScheme parse_decode_scheme(const std::string& s);

// Normalized (pre-denormalization) network output.
struct DecodedOutput {
    Tensor values;
    DecodeScheme scheme = DecodeScheme::spike_count;
    std::size_t T = 0;
};

// Signed count times threshold over T: (pos - neg) * v_th / T.
double decode_spike_count(const LayerState& layer, std::size_t neuron, double v_th, std::size_t T);
// Adds the residual membrane potential the spike count discards:
// ((pos - neg) * v_th + v_mem) / T.
double decode_vmem(const LayerState& layer, std::size_t neuron, double v_th, std::size_t T);

DecodedOutput decode_spike_count(const SpikingNetwork& net, const SimulationState& state, std::size_t T);
DecodedOutput decode_vmem(const SpikingNetwork& net, const SimulationState& state, std::size_t T);
DecodedOutput decode(const SpikingNetwork& net, const SimulationState& state, DecodeScheme scheme);

// Decoded output scaled back to the original network's units.
Tensor denormalized_output(const SpikingNetwork& net, const DecodedOutput& decoded);

std::string decoded_to_json(const DecodedOutput& decoded, const Tensor& denormalized);
void write_decoded(const DecodedOutput& decoded, const Tensor& denormalized,
                   const std::filesystem::path& json_path, const std::filesystem::path& blob_path);

} // namespace snnconv
