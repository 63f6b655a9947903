// SPDX-License-Identifier: Apache-2.0
#include "snnconv/analytics.hpp"

#include "snnconv/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <json.hpp>
#include <sstream>
#include <thread>

namespace snnconv {

using nlohmann::json;

namespace {

void require_steps(std::size_t T) {
    if (T == 0) throw InputError("analytics", "number of time steps must be at least 1");
}

// Runs fn(i) for i in [0, n) on a small thread pool. Callers write to slot i only.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < n; i = next++) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace

std::vector<LayerRates> firing_rates(const SimulationState& state, std::size_t T) {
    require_steps(T);
    const double inv = 1.0 / static_cast<double>(T);
    std::vector<LayerRates> rates(state.layers.size());
    for (std::size_t l = 0; l < state.layers.size(); ++l) {
        const LayerState& ls = state.layers[l];
        const std::size_t n = ls.spikes_pos.size();
        rates[l].activity.resize(n);
        rates[l].signed_rate.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double pos = ls.spikes_pos[i];
            const double neg = ls.spikes_neg[i];
            rates[l].activity[i] = static_cast<float>((pos + neg) * inv);
            rates[l].signed_rate[i] = static_cast<float>((pos - neg) * inv);
        }
    }
    return rates;
}

std::vector<std::uint32_t> raster_neurons(const Shape3& shape, std::size_t channel, std::size_t count) {
    std::vector<std::uint32_t> out;
    if (channel >= shape.channels) return out;
    const std::size_t plane = shape.plane();
    for (std::size_t p = 0; p < std::min(count, plane); ++p) {
        out.push_back(static_cast<std::uint32_t>(channel * plane + p));
    }
    return out;
}

FiringReport firing_report(const SpikingNetwork& net, const SimulationState& state, const FiringReportOptions& opts) {
    if (!(opts.bin_width > 0.0 && opts.bin_width <= 1.0)) {
        throw InputError("analytics", "histogram bin width must lie in (0, 1]");
    }
    if (state.layers.size() != net.layers.size()) {
        throw InputError("analytics", "simulation state does not belong to this network");
    }
    const std::size_t T = state.t;
    const auto rates = firing_rates(state, T);
    const auto bins = static_cast<std::size_t>(std::ceil(1.0 / opts.bin_width - 1e-9));

    FiringReport r;
    r.T = T;
    r.bin_width = opts.bin_width;
    r.raster_layer = opts.raster_layer;
    r.raster_channel = opts.raster_channel;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Shape3 s = net.layers[l].out_shape;
        const auto& act = rates[l].activity;
        LayerFiring lf;
        lf.neurons = act.size();
        lf.histogram.assign(bins, 0);
        for (float v : act) {
            auto b = static_cast<std::size_t>(std::floor(v / opts.bin_width + 1e-9));
            ++lf.histogram[std::min(b, bins - 1)];
        }
        const std::size_t plane = s.plane();
        for (std::size_t c = 0; c < s.channels; ++c) {
            ChannelRate cr{0.0f, 1.0f, 0.0f};
            double sum = 0.0;
            for (std::size_t p = 0; p < plane; ++p) {
                const float v = act[c * plane + p];
                sum += v;
                cr.min = std::min(cr.min, v);
                cr.max = std::max(cr.max, v);
            }
            cr.mean = static_cast<float>(sum / static_cast<double>(plane));
            lf.channels.push_back(cr);
        }
        r.layers.push_back(std::move(lf));
    }

    if (opts.raster_layer < net.layers.size()) {
        r.raster_sampled = raster_neurons(net.layers[opts.raster_layer].out_shape, opts.raster_channel,
                                          opts.raster_neurons);
        for (const SpikeEvent& e : state.trace) {
            if (e.layer != opts.raster_layer) continue;
            if (std::binary_search(r.raster_sampled.begin(), r.raster_sampled.end(), e.neuron)) {
                r.raster.push_back(e);
            }
        }
    }
    return r;
}

double fraction_below(const SimulationState& state, std::size_t layer, double threshold) {
    if (layer >= state.layers.size() || state.t == 0) {
        throw InputError("analytics", "fraction_below: no such layer or empty simulation");
    }
    const auto rates = firing_rates(state, state.t);
    const auto& act = rates[layer].activity;
    const auto below = std::count_if(act.begin(), act.end(), [&](float v) { return v < threshold; });
    return static_cast<double>(below) / static_cast<double>(act.size());
}

std::string firing_report_to_json(const FiringReport& r) {
    json j;
    j["T"] = r.T;
    j["bin_width"] = r.bin_width;
    j["layers"] = json::array();
    for (const LayerFiring& lf : r.layers) {
        json lj;
        lj["neurons"] = lf.neurons;
        lj["channels"] = json::array();
        for (const ChannelRate& c : lf.channels) {
            lj["channels"].push_back({{"mean", c.mean}, {"min", c.min}, {"max", c.max}});
        }
        lj["histogram"] = lf.histogram;
        j["layers"].push_back(lj);
    }
    j["raster"] = {{"layer", r.raster_layer}, {"channel", r.raster_channel}, {"neurons", r.raster_sampled},
                   {"events", r.raster.size()}};
    return j.dump(2) + "\n";
}

std::string histogram_to_csv(const FiringReport& r) {
    std::ostringstream os;
    os << "layer,bin_lo,bin_hi,count\n";
    for (std::size_t l = 0; l < r.layers.size(); ++l) {
        const auto& h = r.layers[l].histogram;
        for (std::size_t b = 0; b < h.size(); ++b) {
            os << l << ',' << static_cast<double>(b) * r.bin_width << ','
               << std::min(1.0, static_cast<double>(b + 1) * r.bin_width) << ',' << h[b] << '\n';
        }
    }
    return os.str();
}

std::vector<LayerProfile> channel_activation_profile(const ActivationStats& stats, NormScheme scheme) {
    std::vector<LayerProfile> out;
    for (const LayerStats& ls : stats.layers) {
        LayerProfile p;
        for (float v : ls.lambda_chan) {
            p.normalized.push_back(scheme == NormScheme::layer_norm ? v / ls.lambda_layer : 1.0f);
        }
        if (!p.normalized.empty()) {
            double sum = 0.0;
            p.min = p.normalized.front();
            for (float v : p.normalized) {
                sum += v;
                p.min = std::min(p.min, v);
            }
            p.mean = static_cast<float>(sum / static_cast<double>(p.normalized.size()));
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::string profile_to_json(const std::vector<LayerProfile>& profile, NormScheme scheme) {
    json j;
    j["scheme"] = to_string(scheme);
    j["layers"] = json::array();
    for (const LayerProfile& p : profile) {
        j["layers"].push_back({{"normalized", p.normalized}, {"mean", p.mean}, {"min", p.min}});
    }
    return j.dump(2) + "\n";
}

double mean_absolute_error(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size() || a.empty()) {
        throw InputError("analytics", "MAE needs two non-empty tensors of equal size");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    }
    return sum / static_cast<double>(a.size());
}

ConvergenceSeries convergence_series(const NetworkSpec& original, const NormalizedNetwork& normnet,
                                     std::span<const Tensor> inputs, std::span<const std::size_t> t_list,
                                     const ConvergenceOptions& opts, std::string label) {
    if (inputs.empty() || t_list.empty()) {
        throw InputError("analytics", "convergence needs at least one input and one time step");
    }
    for (std::size_t i = 0; i < t_list.size(); ++i) {
        if (t_list[i] == 0 || (i > 0 && t_list[i] <= t_list[i - 1])) {
            throw InputError("analytics", "time-step list must be strictly increasing and positive");
        }
    }
    const SpikingNetwork snn = convert(normnet, opts.conversion);
    std::vector<std::vector<double>> errors(inputs.size(), std::vector<double>(t_list.size()));
    parallel_for(inputs.size(), [&](std::size_t n) {
        const Tensor oracle = forward_output(original, inputs[n]);
        Simulator sim(snn, inputs[n]);
        for (std::size_t k = 0; k < t_list.size(); ++k) {
            sim.advance_to(t_list[k]);
            const DecodedOutput d = decode(snn, sim.state(), opts.decode);
            errors[n][k] = mean_absolute_error(denormalized_output(snn, d), oracle);
        }
    });

    ConvergenceSeries s;
    s.label = std::move(label);
    for (std::size_t k = 0; k < t_list.size(); ++k) {
        double sum = 0.0;
        for (const auto& e : errors) sum += e[k];
        const double mae = sum / static_cast<double>(inputs.size());
        s.points.push_back({t_list[k], mae});
        if (!s.t_reach && mae <= opts.target_error) s.t_reach = t_list[k];
    }
    return s;
}

ConvergenceReport convergence_curve(const NetworkSpec& original, const NormalizedNetwork& a,
                                    const NormalizedNetwork& b, std::span<const Tensor> inputs,
                                    std::span<const std::size_t> t_list, const ConvergenceOptions& opts) {
    ConvergenceReport r;
    r.target_error = opts.target_error;
    r.series.push_back(convergence_series(original, a, inputs, t_list, opts, to_string(a.scheme)));
    r.series.push_back(convergence_series(original, b, inputs, t_list, opts, to_string(b.scheme)));
    return r;
}

std::string convergence_to_json(const ConvergenceReport& r) {
    json j;
    j["target_error"] = r.target_error;
    j["metric"] = "mean absolute error of denormalized output vs DNN forward pass";
    j["series"] = json::array();
    for (const ConvergenceSeries& s : r.series) {
        json sj;
        sj["label"] = s.label;
        sj["points"] = json::array();
        for (const ConvergencePoint& p : s.points) sj["points"].push_back({{"T", p.T}, {"mae", p.mae}});
        sj["t_reach"] = s.t_reach ? json(*s.t_reach) : json(nullptr);
        j["series"].push_back(sj);
    }
    return j.dump(2) + "\n";
}

} // namespace snnconv
