// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/netspec.hpp"
#include "snnconv/spikesim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace snnconv {

enum class Precision { fl32, int32 };

std::string to_string(Precision p);

// Per-operation energies in joules (45 nm figures: FL32 MAC = 0.9 pJ add + 3.7 pJ mult).
struct EnergyModel {
    double mac_fl32 = 4.6e-12;
    double ac_fl32 = 0.9e-12;
    double mac_int32 = 3.2e-12;
    double ac_int32 = 0.1e-12;

    double mac(Precision p) const noexcept { return p == Precision::fl32 ? mac_fl32 : mac_int32; }
    double ac(Precision p) const noexcept { return p == Precision::fl32 ? ac_fl32 : ac_int32; }
    void validate() const;
};

// GPU figures default to a Titan V100, the neuromorphic figure to TrueNorth.
struct PlatformModel {
    double gpu_power_w = 250.0;
    double gpu_gflops = 14000.0;
    double neuro_gflops_per_w = 400.0;
    double timestep_s = 1e-3;

    void validate() const;
};

struct DnnOpCounts {
    std::uint64_t macs = 0;
    std::uint64_t bias_adds = 0;
    std::vector<std::uint64_t> layer_macs;
};

// Closed-form count: conv = out positions * out_ch * in_ch * k * k, dense = rows * cols.
DnnOpCounts count_dnn_ops(const NetworkSpec& net);

struct SnnOpCounts {
    std::uint64_t synaptic_acs = 0;  // spike-driven fan-out accumulations
    std::uint64_t bias_acs = 0;      // one per weighted neuron per tick
    std::uint64_t encoder_macs = 0;  // one-off analog input current of the first layer

    std::uint64_t acs() const noexcept { return synaptic_acs + bias_acs; }
};

// Synapses each neuron of the consumer's input touches when it spikes.
std::vector<std::uint64_t> fan_out(const SpikingLayer& consumer);

// Charges every spike its fan-out into the next weighted layer, plus one bias
// accumulation per weighted neuron per tick.
SnnOpCounts count_snn_ops(const SpikingNetwork& net, const SimulationState& state);

struct OpEnergy {
    double dnn_j = 0.0;
    double snn_j = 0.0;
    std::optional<double> ratio;  // dnn / snn; empty when snn_j == 0
};

OpEnergy op_energy(std::uint64_t macs, std::uint64_t acs, const EnergyModel& model, Precision precision);

// E = P * flops / throughput.
double gpu_energy(double flops, const PlatformModel& platform);

struct NeuromorphicEnergy {
    double power_w = 0.0;
    double energy_j = 0.0;
};

// P = op_rate / (GFLOPS/W); E = P * timesteps * timestep duration, with the
// op rate read as operations per second.
NeuromorphicEnergy neuromorphic_energy(double op_rate, const PlatformModel& platform, std::size_t timesteps);

struct PlatformEnergy {
    double gpu_j = 0.0;
    NeuromorphicEnergy neuro;
    double ratio = 0.0;  // gpu / neuromorphic
};

PlatformEnergy platform_energy(double gpu_flops, double neuro_op_rate, std::size_t timesteps,
                               const PlatformModel& platform);

// Rounds to `digits` significant figures.
double round_sig(double x, int digits);

struct EnergyReport {
    DnnOpCounts dnn;
    SnnOpCounts snn;
    std::size_t timesteps = 0;
    EnergyModel model;
    PlatformModel platform;
    OpEnergy fl32;
    OpEnergy int32;
    PlatformEnergy platform_result;
    double gpu_flops = 0.0;
    double neuro_op_rate = 0.0;
};

EnergyReport make_energy_report(const NetworkSpec& net, const SnnOpCounts& snn, std::size_t timesteps,
                                const EnergyModel& model = {}, const PlatformModel& platform = {});

std::string energy_report_to_json(const EnergyReport& report);

// Table-style reproduction of the published GPU vs neuromorphic comparison.
std::string published_comparison_json(const PlatformModel& platform = {});

} // namespace snnconv
