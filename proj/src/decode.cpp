// SPDX-License-Identifier: Apache-2.0
#include "snnconv/decode.hpp"

#include "snnconv/error.hpp"

#include <fstream>
#include <json.hpp>

namespace snnconv {

std::string to_string(DecodeScheme s) { return s == DecodeScheme::v_mem ? "v_mem" : "spike_count"; }

DecodeScheme parse_decode_scheme(const std::string& s) {
    if (s == "spike_count" || s == "count") return DecodeScheme::spike_count;
    if (s == "v_mem" || s == "vmem") return DecodeScheme::v_mem;
    throw InputError("decode", "unknown decode scheme '" + s + "' (expected spike_count or v_mem)");
}

namespace {

void require_steps(std::size_t T) {
    if (T == 0) {
        throw InputError("decode", "number of time steps must be at least 1");
    }
}

double signed_count(const LayerState& layer, std::size_t i) {
    return static_cast<double>(layer.spikes_pos[i]) - static_cast<double>(layer.spikes_neg[i]);
}

template <typename F>
DecodedOutput decode_with(const SpikingNetwork& net, const SimulationState& state, std::size_t T,
                          DecodeScheme scheme, F&& per_neuron) {
    require_steps(T);
    if (state.layers.size() != net.layers.size()) {
        throw InputError("decode", "simulation state does not belong to this network");
    }
    const SpikingLayer& out = net.output_layer();
    const LayerState& ls = state.layers.back();
    DecodedOutput d;
    d.scheme = scheme;
    d.T = T;
    d.values = Tensor::of(out.out_shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        d.values[i] = static_cast<float>(per_neuron(ls, i, out.neuron.v_th_pos, T));
    }
    return d;
}

} // namespace

double decode_spike_count(const LayerState& layer, std::size_t neuron, double v_th, std::size_t T) {
    require_steps(T);
    return signed_count(layer, neuron) * v_th / static_cast<double>(T);
}

double decode_vmem(const LayerState& layer, std::size_t neuron, double v_th, std::size_t T) {
    require_steps(T);
    return (signed_count(layer, neuron) * v_th + layer.v_mem[neuron]) / static_cast<double>(T);
}

DecodedOutput decode_spike_count(const SpikingNetwork& net, const SimulationState& state, std::size_t T) {
    return decode_with(net, state, T, DecodeScheme::spike_count,
                       [](const LayerState& ls, std::size_t i, double v_th, std::size_t t) {
                           return decode_spike_count(ls, i, v_th, t);
                       });
}

DecodedOutput decode_vmem(const SpikingNetwork& net, const SimulationState& state, std::size_t T) {
    return decode_with(net, state, T, DecodeScheme::v_mem,
                       [](const LayerState& ls, std::size_t i, double v_th, std::size_t t) {
                           return decode_vmem(ls, i, v_th, t);
                       });
}

DecodedOutput decode(const SpikingNetwork& net, const SimulationState& state, DecodeScheme scheme) {
    return scheme == DecodeScheme::v_mem ? decode_vmem(net, state, state.t)
                                         : decode_spike_count(net, state, state.t);
}

Tensor denormalized_output(const SpikingNetwork& net, const DecodedOutput& decoded) {
    const Shape3 s = net.output_layer().out_shape;
    if (decoded.values.size() != s.size() || net.output_scale.size() != s.channels) {
        throw InputError("decode", "decoded output does not match the output layer " + s.to_string());
    }
    Tensor out = decoded.values;
    const std::size_t plane = s.plane();
    for (std::size_t c = 0; c < s.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] *= net.output_scale[c];
    }
    return out;
}

std::string decoded_to_json(const DecodedOutput& decoded, const Tensor& denormalized) {
    nlohmann::json j;
    j["scheme"] = to_string(decoded.scheme);
    j["T"] = decoded.T;
    j["shape"] = decoded.values.shape();
    j["normalized"] = std::vector<float>(decoded.values.data().begin(), decoded.values.data().end());
    j["values"] = std::vector<float>(denormalized.data().begin(), denormalized.data().end());
    return j.dump(2) + "\n";
}

void write_decoded(const DecodedOutput& decoded, const Tensor& denormalized,
                   const std::filesystem::path& json_path, const std::filesystem::path& blob_path) {
    std::ofstream out(json_path, std::ios::trunc);
    if (!out) {
        throw InputError("decode", "cannot write " + json_path.string());
    }
    out << decoded_to_json(decoded, denormalized);
    write_f32_file(blob_path, denormalized.data());
}

} // namespace snnconv
