// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/netspec.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("snnconv_" + tag + "_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Single-layer 1x1 conv on a (1, h, w) input with weight w and bias b.
inline snnconv::NetworkSpec single_conv(float w, float b, float alpha, std::size_t h = 1, std::size_t wd = 1) {
    snnconv::NetworkSpec net;
    net.input_shape = {1, h, wd};
    net.alpha = alpha;
    snnconv::LayerSpec L;
    L.kind = snnconv::LayerKind::conv2d;
    L.out_channels = 1;
    L.kernel = 1;
    L.activation = snnconv::Activation::none;
    L.weights = {w};
    L.bias = {b};
    net.layers.push_back(L);
    net.resolve();
    return net;
}

} // namespace testutil

#include "snnconv/spikesim.hpp"

namespace testutil {

// One 1x1 conv neuron driven by a constant current z (input 0, bias z).
inline snnconv::SpikingNetwork constant_neuron(double z, double v_th, double alpha, bool signed_neuron = true) {
    snnconv::SpikingNetwork net;
    net.input_shape = {1, 1, 1};
    snnconv::SpikingLayer L;
    L.kind = snnconv::LayerKind::conv2d;
    L.in_shape = {1, 1, 1};
    L.out_shape = {1, 1, 1};
    L.weights = {0.0f};
    L.bias = {static_cast<float>(z)};
    L.neuron = snnconv::NeuronConfig::make(v_th, alpha, signed_neuron);
    net.layers.push_back(L);
    net.output_scale = {1.0f};
    return net;
}

inline snnconv::Tensor zero_image() { return snnconv::Tensor({1, 1, 1}, 0.0f); }

} // namespace testutil
