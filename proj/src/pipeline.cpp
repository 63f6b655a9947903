// SPDX-License-Identifier: Apache-2.0
#include "snnconv/pipeline.hpp"

#include "snnconv/error.hpp"
#include "snnconv/fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>

namespace snnconv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw InputError("cli", "cannot write " + path.string());
    out << text;
}

fs::path resolve_against(const fs::path& base, const fs::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return (base / p).lexically_normal();
}

void require_exists(const fs::path& p, const char* what) {
    if (!fs::exists(p)) {
        throw InputError("cli", std::string(what) + " not found: " + p.string());
    }
}

} // namespace

void RunConfig::validate() const {
    if (model.empty()) throw InputError("cli", "no model manifest given");
    require_exists(model, "model manifest");
    if (synthetic_inputs == 0) {
        if (calibration_dir.empty()) throw InputError("cli", "no calibration directory given");
        if (!fs::is_directory(calibration_dir)) {
            throw InputError("cli", "calibration directory not found: " + calibration_dir.string());
        }
    }
    if (!eval_dir.empty() && !fs::is_directory(eval_dir)) {
        throw InputError("cli", "evaluation directory not found: " + eval_dir.string());
    }
    if (!stats.empty()) require_exists(stats, "stats file");
    if (timesteps == 0) throw InputError("cli", "timesteps must be at least 1");
    if (!(v_th > 0.0)) throw InputError("cli", "v_th must be positive");
    if (alpha && !(*alpha > 0.0f && *alpha <= 1.0f)) throw InputError("cli", "alpha must lie in (0, 1]");
    if (!(input_scale > 0.0f)) throw InputError("cli", "input_scale must be positive");
    for (std::size_t i = 0; i < t_list.size(); ++i) {
        if (t_list[i] == 0 || (i > 0 && t_list[i] <= t_list[i - 1])) {
            throw InputError("cli", "t_list must be strictly increasing and positive");
        }
    }
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cli", "config file not found: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("cli", "malformed config " + path.string() + ": " + e.what());
    }
    static const std::set<std::string> known = {
        "model", "calibration_dir", "eval_dir", "stats", "output_dir", "scheme", "percentile", "alpha",
        "v_th", "timesteps", "decode", "signed", "accumulate_output", "input_scale", "synthetic_inputs",
        "seed", "t_list", "target_error", "bin_width", "raster_layer", "raster_channel", "raster_neurons",
        "trace", "dump_activations"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw InputError("cli", "unknown config key '" + key + "' in " + path.string());
    }

    const fs::path base = path.parent_path();
    RunConfig c;
    try {
        c.model = resolve_against(base, j.value("model", std::string{}));
        c.calibration_dir = resolve_against(base, j.value("calibration_dir", std::string{}));
        c.eval_dir = resolve_against(base, j.value("eval_dir", std::string{}));
        c.stats = resolve_against(base, j.value("stats", std::string{}));
        c.output_dir = resolve_against(base, j.value("output_dir", c.output_dir.string()));
        if (j.contains("scheme")) c.scheme = parse_norm_scheme(j["scheme"].get<std::string>());
        if (j.contains("percentile")) c.percentile = parse_percentile_mode(j["percentile"].get<std::string>());
        if (j.contains("alpha") && !j["alpha"].is_null()) c.alpha = j["alpha"].get<float>();
        c.v_th = j.value("v_th", c.v_th);
        c.timesteps = j.value("timesteps", c.timesteps);
        if (j.contains("decode")) c.decode = parse_decode_scheme(j["decode"].get<std::string>());
        c.signed_neurons = j.value("signed", c.signed_neurons);
        c.accumulate_output = j.value("accumulate_output", c.accumulate_output);
        c.input_scale = j.value("input_scale", c.input_scale);
        c.synthetic_inputs = j.value("synthetic_inputs", c.synthetic_inputs);
        c.seed = j.value("seed", c.seed);
        c.t_list = j.value("t_list", c.t_list);
        c.target_error = j.value("target_error", c.target_error);
        c.bin_width = j.value("bin_width", c.bin_width);
        c.raster_layer = j.value("raster_layer", c.raster_layer);
        c.raster_channel = j.value("raster_channel", c.raster_channel);
        c.raster_neurons = j.value("raster_neurons", c.raster_neurons);
        c.trace = j.value("trace", c.trace);
        c.dump_activations = j.value("dump_activations", c.dump_activations);
    } catch (const json::exception& e) {
        throw InputError("cli", "bad value in config " + path.string() + ": " + e.what());
    }
    return c;
}

std::string config_to_json(const RunConfig& c) {
    json j;
    j["model"] = c.model.string();
    j["calibration_dir"] = c.calibration_dir.string();
    j["eval_dir"] = c.eval_dir.string();
    j["stats"] = c.stats.string();
    j["output_dir"] = c.output_dir.string();
    j["scheme"] = to_string(c.scheme);
    j["percentile"] = to_string(c.percentile);
    j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
    j["v_th"] = c.v_th;
    j["timesteps"] = c.timesteps;
    j["decode"] = to_string(c.decode);
    j["signed"] = c.signed_neurons;
    j["accumulate_output"] = c.accumulate_output;
    j["input_scale"] = c.input_scale;
    j["synthetic_inputs"] = c.synthetic_inputs;
    j["seed"] = c.seed;
    j["t_list"] = c.t_list;
    j["target_error"] = c.target_error;
    j["bin_width"] = c.bin_width;
    j["raster_layer"] = c.raster_layer;
    j["raster_channel"] = c.raster_channel;
    j["raster_neurons"] = c.raster_neurons;
    j["trace"] = c.trace;
    j["dump_activations"] = c.dump_activations;
    return j.dump(2) + "\n";
}

std::vector<std::size_t> default_t_list(std::size_t timesteps) {
    std::vector<std::size_t> out;
    for (std::size_t decade = 1; decade <= timesteps; decade *= 10) {
        for (std::size_t m : {1, 2, 5}) {
            if (decade * m < timesteps) out.push_back(decade * m);
        }
        if (decade > timesteps / 10) break;
    }
    out.push_back(timesteps);
    return out;
}

NetworkSpec load_pipeline_model(const RunConfig& cfg) {
    NetworkSpec net = fold_batchnorm(load_model(cfg.model));
    if (cfg.alpha) {
        net.alpha = *cfg.alpha;
        net.resolve();
    }
    return net;
}

std::vector<Tensor> load_input_dir(const fs::path& dir, const Shape3& shape) {
    if (!fs::is_directory(dir)) throw InputError("cli", "input directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".f32") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("cli", "no .f32 inputs in " + dir.string());
    std::vector<Tensor> out;
    for (const fs::path& f : files) out.push_back(load_input(f, shape));
    return out;
}

std::vector<Tensor> calibration_inputs(const RunConfig& cfg, const Shape3& shape) {
    if (cfg.synthetic_inputs > 0) {
        return fixtures::random_inputs(shape, cfg.synthetic_inputs, cfg.seed, 0.0f, cfg.input_scale);
    }
    return load_input_dir(cfg.calibration_dir, shape);
}

std::vector<Tensor> evaluation_inputs(const RunConfig& cfg, const Shape3& shape) {
    if (!cfg.eval_dir.empty()) return load_input_dir(cfg.eval_dir, shape);
    return calibration_inputs(cfg, shape);
}

namespace {

ActivationStats obtain_stats(const RunConfig& cfg, const NetworkSpec& net) {
    if (!cfg.stats.empty()) return load_stats(cfg.stats);
    return collect_stats(net, calibration_inputs(cfg, net.input_shape), cfg.percentile);
}

ConversionOptions conversion_options(const RunConfig& cfg) {
    return {cfg.v_th, cfg.signed_neurons, cfg.accumulate_output};
}

ConvergenceOptions convergence_options(const RunConfig& cfg) {
    ConvergenceOptions o;
    o.conversion = conversion_options(cfg);
    o.decode = cfg.decode;
    o.target_error = cfg.target_error;
    return o;
}

std::vector<std::size_t> t_list_for(const RunConfig& cfg) {
    return cfg.t_list.empty() ? default_t_list(cfg.timesteps) : cfg.t_list;
}

fs::path prepare_output(const RunConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    return cfg.output_dir;
}

fs::path echo_config(const RunConfig& cfg, const fs::path& dir) {
    const fs::path p = dir / "run_config.json";
    write_text(p, config_to_json(cfg));
    return p;
}

json snn_description(const SpikingNetwork& snn, const NormalizedNetwork& normnet) {
    json j;
    j["scheme"] = to_string(normnet.scheme);
    j["input_scale"] = snn.input_scale;
    j["output_scale"] = snn.output_scale;
    j["accumulate_output"] = snn.accumulate_output;
    j["layers"] = json::array();
    for (const SpikingLayer& L : snn.layers) {
        json lj{{"kind", to_string(L.kind)}, {"neurons", L.size()}, {"is_output", L.is_output}};
        if (L.kind != LayerKind::maxpool2d) {
            lj["v_th_pos"] = L.neuron.v_th_pos;
            lj["v_th_neg"] = L.neuron.signed_neuron ? json(L.neuron.v_th_neg()) : json(nullptr);
            lj["alpha"] = L.neuron.alpha;
            lj["signed"] = L.neuron.signed_neuron;
        }
        j["layers"].push_back(lj);
    }
    return j;
}

// Per-inference op counts averaged over a batch of simulations.
SnnOpCounts mean_counts(const std::vector<SnnOpCounts>& all) {
    SnnOpCounts sum;
    for (const SnnOpCounts& c : all) {
        sum.synaptic_acs += c.synaptic_acs;
        sum.bias_acs += c.bias_acs;
        sum.encoder_macs += c.encoder_macs;
    }
    const std::uint64_t n = all.size();
    return {(sum.synaptic_acs + n / 2) / n, (sum.bias_acs + n / 2) / n, (sum.encoder_macs + n / 2) / n};
}

} // namespace

CommandResult cmd_calibrate(const RunConfig& cfg) {
    const fs::path dir = prepare_output(cfg);
    const NetworkSpec net = load_pipeline_model(cfg);
    const std::vector<Tensor> inputs = calibration_inputs(cfg, net.input_shape);
    std::vector<std::vector<Tensor>> acts;
    for (const Tensor& x : inputs) acts.push_back(forward(net, x));

    CommandResult r;
    const fs::path stats_path = dir / "stats.json";
    save_stats(stats_from_activations(net, acts, cfg.percentile), stats_path);
    r.files.push_back(stats_path);
    if (cfg.dump_activations) {
        write_activation_dump(dir / "activations", acts);
        r.files.push_back(dir / "activations" / "activations.json");
        r.files.push_back(dir / "activations" / "activations.f32");
    }
    return r;
}

CommandResult cmd_convert(const RunConfig& cfg) {
    const fs::path dir = prepare_output(cfg);
    const NetworkSpec net = load_pipeline_model(cfg);
    const ActivationStats stats = obtain_stats(cfg, net);
    const NormalizedNetwork normnet = normalize(net, stats, cfg.scheme, cfg.input_scale);
    const SpikingNetwork snn = convert(normnet, conversion_options(cfg));

    CommandResult r;
    save_stats(stats, dir / "stats.json");
    save_model(normnet.net, dir / "normalized_model.json");
    write_text(dir / "snn.json", snn_description(snn, normnet).dump(2) + "\n");
    r.files = {dir / "stats.json", dir / "normalized_model.json", dir / "normalized_model.bin", dir / "snn.json"};
    return r;
}

CommandResult cmd_run(const RunConfig& cfg) {
    const fs::path dir = prepare_output(cfg);
    const NetworkSpec net = load_pipeline_model(cfg);
    const ActivationStats stats = obtain_stats(cfg, net);
    const NormalizedNetwork normnet = normalize(net, stats, cfg.scheme, cfg.input_scale);
    const SpikingNetwork snn = convert(normnet, conversion_options(cfg));
    const std::vector<Tensor> inputs = evaluation_inputs(cfg, net.input_shape);

    json decoded_json;
    decoded_json["scheme"] = to_string(cfg.decode);
    decoded_json["T"] = cfg.timesteps;
    decoded_json["shape"] = {net.output_shape().channels, net.output_shape().height, net.output_shape().width};
    decoded_json["outputs"] = json::array();
    std::vector<float> decoded_blob;
    std::vector<SnnOpCounts> counts;
    std::optional<FiringReport> report;
    std::vector<SpikeEvent> first_trace;

    for (std::size_t n = 0; n < inputs.size(); ++n) {
        RecordOptions rec;
        if (n == 0) {
            rec.trace = true;
            if (!cfg.trace) rec.trace_layers = {cfg.raster_layer};
        }
        const SimulationState state = run(snn, inputs[n], cfg.timesteps, rec);
        const DecodedOutput d = decode(snn, state, cfg.decode);
        const Tensor values = denormalized_output(snn, d);
        decoded_json["outputs"].push_back(
            {{"input", n},
             {"normalized", std::vector<float>(d.values.data().begin(), d.values.data().end())},
             {"values", std::vector<float>(values.data().begin(), values.data().end())}});
        decoded_blob.insert(decoded_blob.end(), values.data().begin(), values.data().end());
        counts.push_back(count_snn_ops(snn, state));
        if (n == 0) {
            FiringReportOptions fo;
            fo.bin_width = cfg.bin_width;
            fo.raster_layer = cfg.raster_layer;
            fo.raster_channel = cfg.raster_channel;
            fo.raster_neurons = cfg.raster_neurons;
            report = firing_report(snn, state, fo);
            if (cfg.trace) first_trace = state.trace;
        }
    }

    CommandResult r;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        r.files.push_back(dir / name);
    };
    emit("decoded_outputs.json", decoded_json.dump(2) + "\n");
    write_f32_file(dir / "decoded_outputs.f32", decoded_blob);
    r.files.push_back(dir / "decoded_outputs.f32");
    emit("firing_report.json", firing_report_to_json(*report));
    emit("histogram.csv", histogram_to_csv(*report));
    emit("raster.csv", trace_to_csv(report->raster));
    if (cfg.trace) emit("trace.csv", trace_to_csv(first_trace));

    ConvergenceReport conv;
    conv.target_error = cfg.target_error;
    const auto tl = t_list_for(cfg);
    conv.series.push_back(convergence_series(net, normnet, inputs, tl, convergence_options(cfg),
                                             to_string(cfg.scheme)));
    emit("convergence.json", convergence_to_json(conv));
    emit("energy.json", energy_report_to_json(make_energy_report(net, mean_counts(counts), cfg.timesteps)));
    r.files.push_back(echo_config(cfg, dir));
    return r;
}

CommandResult cmd_analyze(const RunConfig& cfg) {
    const fs::path dir = prepare_output(cfg);
    const NetworkSpec net = load_pipeline_model(cfg);
    const ActivationStats stats = obtain_stats(cfg, net);
    json j;
    j["mode"] = to_string(stats.mode);
    j["layer_norm"] = json::parse(profile_to_json(channel_activation_profile(stats, NormScheme::layer_norm),
                                                  NormScheme::layer_norm));
    j["channel_norm"] = json::parse(profile_to_json(channel_activation_profile(stats, NormScheme::channel_norm),
                                                    NormScheme::channel_norm));
    j["degenerate"] = json::array();
    for (std::size_t l = 0; l < stats.layers.size(); ++l) {
        j["degenerate"].push_back(
            {{"layer", l}, {"layer_degenerate", stats.layers[l].layer_degenerate},
             {"channels", stats.layers[l].degenerate_channels}});
    }
    CommandResult r;
    write_text(dir / "profile.json", j.dump(2) + "\n");
    r.files.push_back(dir / "profile.json");
    return r;
}

CommandResult cmd_energy(const RunConfig& cfg, bool published_only) {
    CommandResult r;
    if (published_only) {
        fs::create_directories(cfg.output_dir);
        write_text(cfg.output_dir / "published_comparison.json", published_comparison_json());
        r.files.push_back(cfg.output_dir / "published_comparison.json");
        return r;
    }
    const fs::path dir = prepare_output(cfg);
    const NetworkSpec net = load_pipeline_model(cfg);
    const ActivationStats stats = obtain_stats(cfg, net);
    const SpikingNetwork snn = convert(normalize(net, stats, cfg.scheme, cfg.input_scale), conversion_options(cfg));
    std::vector<SnnOpCounts> counts;
    for (const Tensor& x : evaluation_inputs(cfg, net.input_shape)) {
        counts.push_back(count_snn_ops(snn, run(snn, x, cfg.timesteps)));
    }
    write_text(dir / "energy.json", energy_report_to_json(make_energy_report(net, mean_counts(counts), cfg.timesteps)));
    write_text(dir / "published_comparison.json", published_comparison_json());
    r.files = {dir / "energy.json", dir / "published_comparison.json"};
    return r;
}

CommandResult cmd_compare(const RunConfig& cfg) {
    const fs::path dir = prepare_output(cfg);
    const NetworkSpec net = load_pipeline_model(cfg);
    const ActivationStats stats = obtain_stats(cfg, net);
    const std::vector<Tensor> inputs = evaluation_inputs(cfg, net.input_shape);
    const auto tl = t_list_for(cfg);
    const ConvergenceReport conv =
        convergence_curve(net, layer_norm(net, stats, cfg.input_scale), channel_norm(net, stats, cfg.input_scale),
                          inputs, tl, convergence_options(cfg));
    CommandResult r;
    write_text(dir / "convergence.json", convergence_to_json(conv));
    r.files.push_back(dir / "convergence.json");
    r.files.push_back(echo_config(cfg, dir));
    return r;
}

} // namespace snnconv
