// SPDX-License-Identifier: Apache-2.0
#include "snnconv/spikesim.hpp"

#include "snnconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace snnconv {

NeuronConfig NeuronConfig::make(double v_th_pos, double alpha, bool signed_neuron) {
    if (!(v_th_pos > 0.0)) {
        throw InputError("spikesim", "v_th must be positive, got " + std::to_string(v_th_pos));
    }
    if (!(alpha > 0.0)) {
        throw InputError("spikesim", "alpha must be positive, got " + std::to_string(alpha));
    }
    return {v_th_pos, alpha, signed_neuron};
}

int step_neuron(double& v_mem, double z, const NeuronConfig& cfg) noexcept {
    v_mem += z;
    if (v_mem >= cfg.v_th_pos * (1.0 - kThresholdTolerance)) {
        v_mem -= cfg.v_th_pos;
        return 1;
    }
    if (cfg.signed_neuron) {
        const double neg = cfg.v_th_neg();
        if (v_mem <= neg * (1.0 - kThresholdTolerance)) {
            v_mem -= neg;
            return -1;
        }
    }
    return 0;
}

SpikingNetwork convert(const NormalizedNetwork& normnet, const ConversionOptions& opts) {
    const NetworkSpec& net = normnet.net;
    if (!(opts.v_th > 0.0)) {
        throw InputError("spikesim", "v_th must be positive, got " + std::to_string(opts.v_th));
    }
    if (net.layers.empty() || !net.layers.front().has_weights()) {
        throw InputError("spikesim", "first layer must be conv2d or dense to receive the input current");
    }
    for (const LayerSpec& L : net.layers) {
        if (L.batchnorm) {
            throw InputError("spikesim", "network must be batchnorm-folded before conversion");
        }
    }

    SpikingNetwork snn;
    snn.input_shape = net.input_shape;
    snn.input_scale = normnet.input_scale;
    snn.output_scale = normnet.output_scale;
    snn.accumulate_output = opts.accumulate_output;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LayerSpec& L = net.layers[l];
        SpikingLayer S;
        S.kind = L.kind;
        S.in_shape = L.in_shape;
        S.out_shape = L.out_shape;
        S.kernel = L.kernel;
        S.stride = L.stride;
        S.padding = L.padding;
        S.is_output = l + 1 == net.layers.size();
        S.weights = L.weights;
        S.bias = L.bias;
        if (S.is_output) {
            S.neuron = NeuronConfig::make(opts.v_th, 1.0, true);
        } else {
            const double alpha = L.activation == Activation::leaky_relu ? net.alpha : 1.0;
            S.neuron = NeuronConfig::make(opts.v_th, alpha, opts.signed_neurons);
            if (L.has_weights() && opts.v_th != 1.0) {
                const auto gain = static_cast<float>(opts.v_th);
                for (float& w : S.weights) w *= gain;
                for (float& b : S.bias) b *= gain;
            }
        }
        snn.layers.push_back(std::move(S));
    }
    return snn;
}

namespace {

// z += value * weight over the fan-out of every non-zero input. Returns the
// number of accumulations performed.
template <typename T>
std::uint64_t scatter(const SpikingLayer& L, std::span<const T> incoming, std::span<double> z) {
    const Shape3 in = L.in_shape;
    const Shape3 out = L.out_shape;
    std::uint64_t ops = 0;
    if (L.kind == LayerKind::dense) {
        const std::size_t n = in.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (incoming[i] == T{0}) continue;
            const double v = static_cast<double>(incoming[i]);
            for (std::size_t o = 0; o < out.channels; ++o) {
                z[o] += v * static_cast<double>(L.weights[o * n + i]);
            }
            ops += out.channels;
        }
        return ops;
    }

    const std::size_t k = L.kernel;
    const auto pad_y = static_cast<std::ptrdiff_t>(axis_window(in.height, k, L.stride, L.padding).pad_before);
    const auto pad_x = static_cast<std::ptrdiff_t>(axis_window(in.width, k, L.stride, L.padding).pad_before);
    const auto stride = static_cast<std::ptrdiff_t>(L.stride);
    const std::size_t out_plane = out.plane();
    for (std::size_t c = 0; c < in.channels; ++c) {
        for (std::size_t y = 0; y < in.height; ++y) {
            for (std::size_t x = 0; x < in.width; ++x) {
                const T s = incoming[(c * in.height + y) * in.width + x];
                if (s == T{0}) continue;
                const double v = static_cast<double>(s);
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + pad_y - static_cast<std::ptrdiff_t>(ky);
                    if (ny < 0 || ny % stride != 0) continue;
                    const auto oy = static_cast<std::size_t>(ny / stride);
                    if (oy >= out.height) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t nx =
                            static_cast<std::ptrdiff_t>(x) + pad_x - static_cast<std::ptrdiff_t>(kx);
                        if (nx < 0 || nx % stride != 0) continue;
                        const auto ox = static_cast<std::size_t>(nx / stride);
                        if (ox >= out.width) continue;
                        const std::size_t pos = oy * out.width + ox;
                        const std::size_t w_off = (c * k + ky) * k + kx;
                        const std::size_t w_stride = in.channels * k * k;
                        for (std::size_t o = 0; o < out.channels; ++o) {
                            z[o * out_plane + pos] += v * static_cast<double>(L.weights[o * w_stride + w_off]);
                        }
                        ops += out.channels;
                    }
                }
            }
        }
    }
    return ops;
}

void fill_bias(const SpikingLayer& L, std::span<double> z) {
    const std::size_t plane = L.out_shape.plane();
    for (std::size_t o = 0; o < L.out_shape.channels; ++o) {
        for (std::size_t p = 0; p < plane; ++p) {
            z[o * plane + p] = static_cast<double>(L.bias[o]);
        }
    }
}

} // namespace

std::uint64_t synaptic_input(const SpikingLayer& layer, std::span<const std::int8_t> incoming,
                             std::span<double> z) {
    if (!(layer.kind == LayerKind::conv2d || layer.kind == LayerKind::dense)) {
        throw InputError("spikesim", "synaptic_input needs a conv2d or dense layer");
    }
    if (incoming.size() != layer.in_shape.size() || z.size() != layer.out_shape.size()) {
        throw InputError("spikesim", "synaptic_input shape mismatch: got " + std::to_string(incoming.size()) +
                                         " inputs / " + std::to_string(z.size()) + " outputs for layer " +
                                         layer.in_shape.to_string() + " -> " + layer.out_shape.to_string());
    }
    fill_bias(layer, z);
    return scatter<std::int8_t>(layer, incoming, z);
}

std::vector<double> encode_input(const Tensor& image, float input_scale) {
    if (!(input_scale > 0.0f)) {
        throw InputError("spikesim", "input scale must be positive");
    }
    std::vector<double> current(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = static_cast<double>(image[i]) / static_cast<double>(input_scale);
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InputError("spikesim", "input value " + std::to_string(image[i]) + " at index " +
                                             std::to_string(i) + " lies outside [0, 1] after scaling");
        }
        current[i] = v;
    }
    return current;
}

void spike_maxpool(const SpikingLayer& L, std::span<const std::int8_t> incoming,
                   std::span<const std::int64_t> prior_counts, std::span<std::int8_t> out) {
    const Shape3 in = L.in_shape;
    const Shape3 os = L.out_shape;
    if (incoming.size() != in.size() || prior_counts.size() != in.size() || out.size() != os.size()) {
        throw InputError("spikesim", "spike_maxpool shape mismatch");
    }
    const std::size_t k = L.kernel;
    const auto pad_y = static_cast<std::ptrdiff_t>(axis_window(in.height, k, L.stride, L.padding).pad_before);
    const auto pad_x = static_cast<std::ptrdiff_t>(axis_window(in.width, k, L.stride, L.padding).pad_before);
    for (std::size_t c = 0; c < os.channels; ++c) {
        for (std::size_t oy = 0; oy < os.height; ++oy) {
            for (std::size_t ox = 0; ox < os.width; ++ox) {
                std::size_t best = in.size();
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * L.stride + ky) - pad_y;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * L.stride + kx) - pad_x;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                        const std::size_t idx = (c * in.height + static_cast<std::size_t>(iy)) * in.width +
                                                static_cast<std::size_t>(ix);
                        if (best == in.size() || prior_counts[idx] > prior_counts[best]) {
                            best = idx;
                        }
                    }
                }
                out[(c * os.height + oy) * os.width + ox] = incoming[best];
            }
        }
    }
}

Simulator::Simulator(const SpikingNetwork& net, const Tensor& image, RecordOptions record)
    : net_(&net), record_(std::move(record)) {
    if (net.layers.empty() || net.layers.front().kind == LayerKind::maxpool2d) {
        throw InputError("spikesim", "spiking network must start with a conv2d or dense layer");
    }
    if (image.size() != net.input_shape.size()) {
        throw InputError("spikesim", "image has " + std::to_string(image.size()) +
                                         " values, network expects " + net.input_shape.to_string());
    }
    const std::vector<double> analog = encode_input(image, net.input_scale);
    const SpikingLayer& first = net.layers.front();
    input_current_.assign(first.size(), 0.0);
    fill_bias(first, input_current_);
    state_.encoder_macs = scatter<double>(first, analog, input_current_);

    state_.layers.resize(net.layers.size());
    spikes_.resize(net.layers.size());
    net_counts_.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const SpikingLayer& L = net.layers[l];
        LayerState& ls = state_.layers[l];
        if (L.kind != LayerKind::maxpool2d) ls.v_mem.assign(L.size(), 0.0);
        ls.spikes_pos.assign(L.size(), 0);
        ls.spikes_neg.assign(L.size(), 0);
        spikes_[l].assign(L.size(), 0);
        net_counts_[l].assign(L.size(), 0);
    }
}

bool Simulator::traced(std::size_t layer) const {
    if (!record_.trace) return false;
    if (record_.trace_layers.empty()) return true;
    for (std::size_t l : record_.trace_layers) {
        if (l == layer) return true;
    }
    return false;
}

void Simulator::step() {
    const SpikingNetwork& net = *net_;
    const auto tick = static_cast<std::uint32_t>(state_.t + 1);
    std::vector<std::int64_t> prior;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const SpikingLayer& L = net.layers[l];
        LayerState& ls = state_.layers[l];
        std::vector<std::int8_t>& out = spikes_[l];
        const std::size_t n = L.size();

        if (L.kind == LayerKind::maxpool2d) {
            const auto& in_spikes = spikes_[l - 1];
            const auto& in_counts = net_counts_[l - 1];
            prior.resize(in_counts.size());
            for (std::size_t i = 0; i < prior.size(); ++i) prior[i] = in_counts[i] - in_spikes[i];
            spike_maxpool(L, in_spikes, prior, out);
        } else {
            z_.resize(n);
            if (l == 0) {
                z_ = input_current_;
            } else {
                state_.synaptic_acs += synaptic_input(L, spikes_[l - 1], z_);
            }
            state_.bias_acs += n;
            if (L.is_output && net.accumulate_output) {
                for (std::size_t i = 0; i < n; ++i) ls.v_mem[i] += z_[i];
                std::fill(out.begin(), out.end(), std::int8_t{0});
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    out[i] = static_cast<std::int8_t>(step_neuron(ls.v_mem[i], z_[i], L.neuron));
                }
            }
        }

        const bool trace = traced(l);
        for (std::size_t i = 0; i < n; ++i) {
            const std::int8_t s = out[i];
            if (s == 0) continue;
            net_counts_[l][i] += s;
            if (s > 0) {
                ++ls.spikes_pos[i];
            } else {
                ++ls.spikes_neg[i];
            }
            if (trace) {
                state_.trace.push_back({tick, static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(i), s});
            }
        }
    }
    state_.t = tick;
}

void Simulator::advance_to(std::size_t t) {
    while (state_.t < t) step();
}

SimulationState run(const SpikingNetwork& net, const Tensor& image, std::size_t T, const RecordOptions& record) {
    if (T == 0) {
        throw InputError("spikesim", "number of time steps must be at least 1");
    }
    Simulator sim(net, image, record);
    sim.advance_to(T);
    return std::move(sim).take_state();
}

std::string trace_to_csv(std::span<const SpikeEvent> events) {
    std::ostringstream os;
    os << "t,layer,neuron,sign\n";
    for (const SpikeEvent& e : events) {
        os << e.t << ',' << e.layer << ',' << e.neuron << ',' << static_cast<int>(e.sign) << '\n';
    }
    return os.str();
}

void write_trace_csv(std::span<const SpikeEvent> events, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("spikesim", "cannot write " + path.string());
    }
    out << trace_to_csv(events);
}

} // namespace snnconv
