// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/analytics.hpp"
#include "snnconv/calibrate.hpp"
#include "snnconv/decode.hpp"
#include "snnconv/energy.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace snnconv {

struct RunConfig {
    std::filesystem::path model;
    std::filesystem::path calibration_dir;
    std::filesystem::path eval_dir;  // empty: reuse the calibration set
    std::filesystem::path stats;     // empty: calibrate inline
    std::filesystem::path output_dir = "snnconv_out";

    NormScheme scheme = NormScheme::channel_norm;
    PercentileMode percentile = PercentileMode::p99_9;
    std::optional<float> alpha;  // overrides the model's slope
    double v_th = 1.0;
    std::size_t timesteps = 1000;
    DecodeScheme decode = DecodeScheme::v_mem;
    bool signed_neurons = true;
    bool accumulate_output = false;
    float input_scale = 1.0f;

    // Random inputs replace the calibration directory when > 0.
    std::size_t synthetic_inputs = 0;
    std::uint64_t seed = 0;

    std::vector<std::size_t> t_list;  // empty: 1-2-5 ladder up to timesteps
    double target_error = 0.02;
    double bin_width = 0.005;
    std::size_t raster_layer = 0;
    std::size_t raster_channel = 0;
    std::size_t raster_neurons = 20;
    bool trace = false;
    bool dump_activations = false;

    void validate() const;
};

// Reads a JSON config; unknown keys are rejected.
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

std::vector<std::size_t> default_t_list(std::size_t timesteps);

// Model with batch-norm folded and the configured slope applied.
NetworkSpec load_pipeline_model(const RunConfig& cfg);
// *.f32 files in `dir`, sorted by name.
std::vector<Tensor> load_input_dir(const std::filesystem::path& dir, const Shape3& shape);
std::vector<Tensor> calibration_inputs(const RunConfig& cfg, const Shape3& shape);
std::vector<Tensor> evaluation_inputs(const RunConfig& cfg, const Shape3& shape);

struct CommandResult {
    std::vector<std::filesystem::path> files;
};

CommandResult cmd_calibrate(const RunConfig& cfg);
CommandResult cmd_convert(const RunConfig& cfg);
CommandResult cmd_run(const RunConfig& cfg);
CommandResult cmd_analyze(const RunConfig& cfg);
CommandResult cmd_energy(const RunConfig& cfg, bool published_only = false);
CommandResult cmd_compare(const RunConfig& cfg);

} // namespace snnconv
