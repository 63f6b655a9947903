// SPDX-License-Identifier: Apache-2.0
#include "snnconv/energy.hpp"

#include "snnconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

namespace snnconv {

using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::fl32 ? "fl32" : "int32"; }

void EnergyModel::validate() const {
    for (double v : {mac_fl32, ac_fl32, mac_int32, ac_int32}) {
        if (!(v > 0.0)) throw InputError("energy", "per-op energies must be positive");
    }
    if (!(mac_fl32 > ac_fl32) || !(mac_int32 > ac_int32)) {
        throw InputError("energy", "a MAC must cost more than an AC at the same precision");
    }
}

void PlatformModel::validate() const {
    for (double v : {gpu_power_w, gpu_gflops, neuro_gflops_per_w, timestep_s}) {
        if (!(v > 0.0)) throw InputError("energy", "platform parameters must be positive");
    }
}

DnnOpCounts count_dnn_ops(const NetworkSpec& net) {
    DnnOpCounts c;
    for (const LayerSpec& L : net.layers) {
        std::uint64_t macs = 0;
        if (L.kind == LayerKind::conv2d) {
            macs = std::uint64_t{L.out_shape.plane()} * L.out_channels * L.in_shape.channels * L.kernel * L.kernel;
        } else if (L.kind == LayerKind::dense) {
            macs = std::uint64_t{L.out_channels} * L.in_shape.size();
        }
        if (L.has_weights()) c.bias_adds += L.out_shape.size();
        c.layer_macs.push_back(macs);
        c.macs += macs;
    }
    return c;
}

namespace {

// Output positions along one axis whose window covers input coordinate `pos`.
std::uint64_t axis_cover(std::size_t pos, std::size_t in, std::size_t out, std::size_t kernel,
                         std::size_t stride, Padding padding) {
    const auto pad = static_cast<std::ptrdiff_t>(axis_window(in, kernel, stride, padding).pad_before);
    std::uint64_t n = 0;
    for (std::size_t o = 0; o < out; ++o) {
        const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(o * stride) - pad;
        const auto p = static_cast<std::ptrdiff_t>(pos);
        if (p >= start && p < start + static_cast<std::ptrdiff_t>(kernel)) ++n;
    }
    return n;
}

} // namespace

std::vector<std::uint64_t> fan_out(const SpikingLayer& consumer) {
    const Shape3 in = consumer.in_shape;
    const Shape3 out = consumer.out_shape;
    std::vector<std::uint64_t> result(in.size(), 0);
    switch (consumer.kind) {
    case LayerKind::dense:
        std::fill(result.begin(), result.end(), out.channels);
        break;
    case LayerKind::conv2d: {
        std::vector<std::uint64_t> ys(in.height), xs(in.width);
        for (std::size_t y = 0; y < in.height; ++y)
            ys[y] = axis_cover(y, in.height, out.height, consumer.kernel, consumer.stride, consumer.padding);
        for (std::size_t x = 0; x < in.width; ++x)
            xs[x] = axis_cover(x, in.width, out.width, consumer.kernel, consumer.stride, consumer.padding);
        for (std::size_t c = 0; c < in.channels; ++c)
            for (std::size_t y = 0; y < in.height; ++y)
                for (std::size_t x = 0; x < in.width; ++x)
                    result[(c * in.height + y) * in.width + x] = out.channels * ys[y] * xs[x];
        break;
    }
    case LayerKind::maxpool2d:
        // Pooling routes spikes; it performs no accumulation.
        break;
    }
    return result;
}

SnnOpCounts count_snn_ops(const SpikingNetwork& net, const SimulationState& state) {
    if (state.layers.size() != net.layers.size()) {
        throw InputError("energy", "simulation state does not belong to this network");
    }
    SnnOpCounts c;
    c.encoder_macs = state.encoder_macs;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const SpikingLayer& L = net.layers[l];
        if (L.kind != LayerKind::maxpool2d) c.bias_acs += std::uint64_t{L.size()} * state.t;
        if (l + 1 == net.layers.size()) break;
        const std::vector<std::uint64_t> fo = fan_out(net.layers[l + 1]);
        const LayerState& ls = state.layers[l];
        for (std::size_t i = 0; i < fo.size(); ++i) {
            c.synaptic_acs += (std::uint64_t{ls.spikes_pos[i]} + ls.spikes_neg[i]) * fo[i];
        }
    }
    return c;
}

OpEnergy op_energy(std::uint64_t macs, std::uint64_t acs, const EnergyModel& model, Precision precision) {
    model.validate();
    OpEnergy e;
    e.dnn_j = static_cast<double>(macs) * model.mac(precision);
    e.snn_j = static_cast<double>(acs) * model.ac(precision);
    if (e.snn_j > 0.0) e.ratio = e.dnn_j / e.snn_j;
    return e;
}

double gpu_energy(double flops, const PlatformModel& platform) {
    platform.validate();
    if (flops < 0.0) throw InputError("energy", "flops must be non-negative");
    return platform.gpu_power_w * flops / (platform.gpu_gflops * 1e9);
}

NeuromorphicEnergy neuromorphic_energy(double op_rate, const PlatformModel& platform, std::size_t timesteps) {
    platform.validate();
    if (op_rate < 0.0) throw InputError("energy", "op rate must be non-negative");
    NeuromorphicEnergy e;
    e.power_w = op_rate / (platform.neuro_gflops_per_w * 1e9);
    e.energy_j = e.power_w * static_cast<double>(timesteps) * platform.timestep_s;
    return e;
}

PlatformEnergy platform_energy(double gpu_flops, double neuro_op_rate, std::size_t timesteps,
                               const PlatformModel& platform) {
    PlatformEnergy p;
    p.gpu_j = gpu_energy(gpu_flops, platform);
    p.neuro = neuromorphic_energy(neuro_op_rate, platform, timesteps);
    p.ratio = p.neuro.energy_j > 0.0 ? p.gpu_j / p.neuro.energy_j : 0.0;
    return p;
}

double round_sig(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    const double magnitude = std::floor(std::log10(std::fabs(x)));
    const double scale = std::pow(10.0, static_cast<double>(digits - 1) - magnitude);
    return std::round(x * scale) / scale;
}

EnergyReport make_energy_report(const NetworkSpec& net, const SnnOpCounts& snn, std::size_t timesteps,
                                const EnergyModel& model, const PlatformModel& platform) {
    EnergyReport r;
    r.dnn = count_dnn_ops(net);
    r.snn = snn;
    r.timesteps = timesteps;
    r.model = model;
    r.platform = platform;
    r.fl32 = op_energy(r.dnn.macs, snn.acs(), model, Precision::fl32);
    r.int32 = op_energy(r.dnn.macs, snn.acs(), model, Precision::int32);
    // One MAC is two floating-point operations.
    r.gpu_flops = 2.0 * static_cast<double>(r.dnn.macs);
    r.neuro_op_rate = timesteps > 0 ? static_cast<double>(snn.acs()) /
                                          (static_cast<double>(timesteps) * platform.timestep_s)
                                    : 0.0;
    r.platform_result = platform_energy(r.gpu_flops, r.neuro_op_rate, timesteps, platform);
    return r;
}

namespace {

json op_energy_json(const OpEnergy& e) {
    return {{"dnn_j", e.dnn_j}, {"snn_j", e.snn_j}, {"ratio", e.ratio ? json(*e.ratio) : json(nullptr)}};
}

json platform_json(const PlatformModel& p) {
    return {{"gpu_power_w", p.gpu_power_w},
            {"gpu_gflops", p.gpu_gflops},
            {"neuro_gflops_per_w", p.neuro_gflops_per_w},
            {"timestep_s", p.timestep_s}};
}

json formulas_json() {
    return {{"op_dnn", "dnn_j = macs * mac_cost"},
            {"op_snn", "snn_j = acs * ac_cost"},
            {"gpu", "energy_j = gpu_power_w * flops / (gpu_gflops * 1e9)"},
            {"neuromorphic", "power_w = op_rate / (neuro_gflops_per_w * 1e9); "
                             "energy_j = power_w * timesteps * timestep_s"},
            {"op_rate_reading",
             "op_rate is taken as operations per second; the per-second vs per-timestep reading "
             "of the neuromorphic FLOPs column is ambiguous and this choice reproduces the published energies"}};
}

} // namespace

std::string energy_report_to_json(const EnergyReport& r) {
    json j;
    j["inputs"] = {{"timesteps", r.timesteps},
                   {"energy_model",
                    {{"mac_fl32_j", r.model.mac_fl32},
                     {"ac_fl32_j", r.model.ac_fl32},
                     {"mac_int32_j", r.model.mac_int32},
                     {"ac_int32_j", r.model.ac_int32}}},
                   {"platform", platform_json(r.platform)}};
    j["counts"] = {{"dnn_macs", r.dnn.macs},
                   {"dnn_bias_adds", r.dnn.bias_adds},
                   {"dnn_layer_macs", r.dnn.layer_macs},
                   {"snn_synaptic_acs", r.snn.synaptic_acs},
                   {"snn_bias_acs", r.snn.bias_acs},
                   {"snn_acs", r.snn.acs()},
                   {"snn_encoder_macs", r.snn.encoder_macs}};
    j["op_energy"] = {{"fl32", op_energy_json(r.fl32)}, {"int32", op_energy_json(r.int32)}};
    j["platform_energy"] = {{"gpu_flops", r.gpu_flops},
                            {"gpu_j", r.platform_result.gpu_j},
                            {"neuro_op_rate", r.neuro_op_rate},
                            {"neuro_power_w", r.platform_result.neuro.power_w},
                            {"neuro_j", r.platform_result.neuro.energy_j},
                            {"ratio", r.platform_result.ratio}};
    j["formulas"] = formulas_json();
    return j.dump(2) + "\n";
}

std::string published_comparison_json(const PlatformModel& platform) {
    struct Row {
        const char* scheme;
        double op_rate;
        std::size_t timesteps;
    };
    constexpr double tiny_yolo_flops = 6.97e9;
    const Row rows[] = {{"layer", 5.28e7, 8000}, {"channel", 4.90e7, 3500}};

    json j;
    j["platform"] = platform_json(platform);
    const double gpu = gpu_energy(tiny_yolo_flops, platform);
    j["gpu"] = {{"flops", tiny_yolo_flops}, {"energy_j", gpu}, {"energy_j_2sf", round_sig(gpu, 2)}};
    j["neuromorphic"] = json::array();
    for (const Row& row : rows) {
        const NeuromorphicEnergy e = neuromorphic_energy(row.op_rate, platform, row.timesteps);
        j["neuromorphic"].push_back({{"scheme", row.scheme},
                                     {"op_rate", row.op_rate},
                                     {"timesteps", row.timesteps},
                                     {"power_w", e.power_w},
                                     {"energy_j", e.energy_j},
                                     {"energy_j_3sf", round_sig(e.energy_j, 3)},
                                     {"gpu_ratio", gpu / e.energy_j},
                                     {"gpu_ratio_from_rounded", round_sig(gpu, 2) / round_sig(e.energy_j, 3)}});
    }
    j["formulas"] = formulas_json();
    return j.dump(2) + "\n";
}

} // namespace snnconv
