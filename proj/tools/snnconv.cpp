// SPDX-License-Identifier: Apache-2.0
// snnconv: DNN-to-SNN conversion, simulation and analysis front end.

#include "snnconv/error.hpp"
#include "snnconv/fixtures.hpp"
#include "snnconv/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace snnconv;
namespace fs = std::filesystem;

// Flag values; anything left unset falls back to the config file.
struct Overrides {
    std::string config;
    std::optional<std::string> model, calib, eval, stats, out;
    std::optional<std::string> scheme, percentile, decode;
    std::optional<float> alpha, input_scale;
    std::optional<double> v_th, target_error, bin_width;
    std::optional<std::size_t> timesteps, synthetic, raster_layer, raster_channel, raster_neurons;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<std::size_t>> t_list;
    bool unsigned_neurons = false;
    bool accumulate_output = false;
    bool trace = false;
    bool dump_activations = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON run config");
    cmd->add_option("--model", o.model, "model manifest (JSON)");
    cmd->add_option("--calib", o.calib, "calibration input directory (*.f32)");
    cmd->add_option("--eval", o.eval, "evaluation input directory (*.f32)");
    cmd->add_option("--stats", o.stats, "precomputed stats file");
    cmd->add_option("-o,--out", o.out, "output directory");
    cmd->add_option("--scheme", o.scheme, "layer | channel");
    cmd->add_option("--percentile", o.percentile, "max | p99.9");
    cmd->add_option("--decode", o.decode, "spike_count | v_mem");
    cmd->add_option("--alpha", o.alpha, "leaky-ReLU slope override");
    cmd->add_option("--vth", o.v_th, "positive threshold voltage");
    cmd->add_option("-T,--timesteps", o.timesteps, "simulation length");
    cmd->add_option("--t-list", o.t_list, "time steps for the convergence curve");
    cmd->add_option("--target-error", o.target_error, "MAE target for convergence");
    cmd->add_option("--input-scale", o.input_scale, "input scale lambda^0");
    cmd->add_option("--synthetic", o.synthetic, "use N random inputs instead of a calibration dir");
    cmd->add_option("--seed", o.seed, "seed for synthetic inputs");
    cmd->add_option("--bin-width", o.bin_width, "firing-rate histogram bin width");
    cmd->add_option("--raster-layer", o.raster_layer);
    cmd->add_option("--raster-channel", o.raster_channel);
    cmd->add_option("--raster-neurons", o.raster_neurons);
    cmd->add_flag("--unsigned", o.unsigned_neurons, "plain IF neurons (no negative spikes)");
    cmd->add_flag("--accumulate-output", o.accumulate_output, "output layer integrates without firing");
    cmd->add_flag("--trace", o.trace, "export the full spike trace of the first input");
    cmd->add_flag("--dump-activations", o.dump_activations, "write DNN activations next to the stats");
}

RunConfig build_config(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.model) c.model = *o.model;
    if (o.calib) c.calibration_dir = *o.calib;
    if (o.eval) c.eval_dir = *o.eval;
    if (o.stats) c.stats = *o.stats;
    if (o.out) c.output_dir = *o.out;
    if (o.scheme) c.scheme = parse_norm_scheme(*o.scheme);
    if (o.percentile) c.percentile = parse_percentile_mode(*o.percentile);
    if (o.decode) c.decode = parse_decode_scheme(*o.decode);
    if (o.alpha) c.alpha = *o.alpha;
    if (o.input_scale) c.input_scale = *o.input_scale;
    if (o.v_th) c.v_th = *o.v_th;
    if (o.target_error) c.target_error = *o.target_error;
    if (o.bin_width) c.bin_width = *o.bin_width;
    if (o.timesteps) c.timesteps = *o.timesteps;
    if (o.synthetic) c.synthetic_inputs = *o.synthetic;
    if (o.raster_layer) c.raster_layer = *o.raster_layer;
    if (o.raster_channel) c.raster_channel = *o.raster_channel;
    if (o.raster_neurons) c.raster_neurons = *o.raster_neurons;
    if (o.seed) c.seed = *o.seed;
    if (o.t_list) c.t_list = *o.t_list;
    if (o.unsigned_neurons) c.signed_neurons = false;
    if (o.accumulate_output) c.accumulate_output = true;
    if (o.trace) c.trace = true;
    if (o.dump_activations) c.dump_activations = true;
    return c;
}

// Writes the skewed demo network plus calibration/evaluation inputs.
void write_fixture(const fs::path& dir, std::uint64_t seed) {
    const fixtures::SkewedFixture fx = fixtures::skewed_fixture(seed);
    fs::create_directories(dir / "calib");
    fs::create_directories(dir / "eval");
    save_model(fx.net, dir / "model.json");
    auto name = [](std::size_t i) {
        std::string s = std::to_string(i);
        return "input_" + std::string(4 - std::min<std::size_t>(4, s.size()), '0') + s + ".f32";
    };
    for (std::size_t i = 0; i < fx.calibration.size(); ++i) save_input(fx.calibration[i], dir / "calib" / name(i));
    for (std::size_t i = 0; i < fx.evaluation.size(); ++i) save_input(fx.evaluation[i], dir / "eval" / name(i));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DNN-to-SNN conversion with channel-wise normalization and signed IBT neurons"};
    app.require_subcommand(1);

    Overrides o;
    bool published = false;
    std::string fixture_dir = "fixture";
    std::uint64_t fixture_seed = 1;

    auto* calibrate = app.add_subcommand("calibrate", "collect activation statistics");
    auto* convert = app.add_subcommand("convert", "normalize and convert to a spiking network");
    auto* run = app.add_subcommand("run", "simulate, decode and write reports");
    auto* analyze = app.add_subcommand("analyze", "per-channel normalized activation profile");
    auto* energy = app.add_subcommand("energy", "operation counts and energy estimates");
    auto* compare = app.add_subcommand("compare", "layer vs channel normalization convergence");
    auto* fixture = app.add_subcommand("fixture", "write the skewed-channel demo model and inputs");
    for (auto* cmd : {calibrate, convert, run, analyze, energy, compare}) add_common(cmd, o);
    energy->add_flag("--published", published, "only reproduce the published GPU vs neuromorphic table");
    fixture->add_option("-o,--out", fixture_dir, "output directory");
    fixture->add_option("--seed", fixture_seed, "fixture seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        CommandResult result;
        if (fixture->parsed()) {
            write_fixture(fixture_dir, fixture_seed);
            std::cout << "wrote fixture to " << fixture_dir << '\n';
            return 0;
        }
        const RunConfig cfg = build_config(o);
        if (calibrate->parsed()) result = cmd_calibrate(cfg);
        else if (convert->parsed()) result = cmd_convert(cfg);
        else if (run->parsed()) result = cmd_run(cfg);
        else if (analyze->parsed()) result = cmd_analyze(cfg);
        else if (energy->parsed()) result = cmd_energy(cfg, published);
        else if (compare->parsed()) result = cmd_compare(cfg);
        for (const auto& f : result.files) std::cout << f.string() << '\n';
        return 0;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
