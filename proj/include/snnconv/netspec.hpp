// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace snnconv {

enum class LayerKind { conv2d, dense, maxpool2d };
enum class Padding { valid, same };
enum class Activation { leaky_relu, none };

std::string to_string(LayerKind k);
std::string to_string(Padding p);
std::string to_string(Activation a);
LayerKind parse_layer_kind(const std::string& s);
Padding parse_padding(const std::string& s);
Activation parse_activation(const std::string& s);

// Per-output-channel batch-norm parameters.
struct BatchNorm {
    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> mean;
    std::vector<float> variance;
    float epsilon = 1e-3f;
};

struct LayerSpec {
    LayerKind kind = LayerKind::conv2d;
    std::size_t out_channels = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    Padding padding = Padding::valid;
    Activation activation = Activation::leaky_relu;

    // conv2d: (out, in, k, k); dense: (out, in) with `in` the flattened (C, H, W) input.
    std::vector<float> weights;
    std::vector<float> bias;
    std::optional<BatchNorm> batchnorm;

    // Filled in by NetworkSpec::resolve().
    Shape3 in_shape;
    Shape3 out_shape;

    bool has_weights() const noexcept { return kind != LayerKind::maxpool2d; }
    // Weights per output channel (fan-in).
    std::size_t fan_in() const noexcept;
    std::size_t weight_count() const noexcept { return out_channels * fan_in(); }
};

// Output extent and leading padding along one spatial axis.
struct AxisWindow {
    std::size_t out = 0;
    std::size_t pad_before = 0;
};
AxisWindow axis_window(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

// Output shape of `layer` applied to `in`; a zero-size shape when the window does not fit.
Shape3 output_shape_for(const LayerSpec& layer, const Shape3& in);

struct NetworkSpec {
    Shape3 input_shape;
    float alpha = 0.01f;
    std::vector<LayerSpec> layers;

    // Derives per-layer shapes and checks every structural invariant.
    // Throws InputError naming the offending layer index.
    void resolve();

    const Shape3& output_shape() const { return layers.back().out_shape; }
};

inline float leaky_relu(float x, float alpha) noexcept {
    return x >= 0.0f ? x : alpha * x;
}

// Pre-activation output of one layer (convolution / matrix product / pooling).
Tensor layer_preactivation(const LayerSpec& layer, const Tensor& input);

// Post-activation tensor of every layer; back() is the linear network output.
std::vector<Tensor> forward(const NetworkSpec& net, const Tensor& input);
Tensor forward_output(const NetworkSpec& net, const Tensor& input);

// Folds every batch-norm block into the preceding weights and bias.
NetworkSpec fold_batchnorm(const NetworkSpec& net);

// ---- serialization -------------------------------------------------------

// Reads a JSON manifest plus its little-endian float32 weight blob.
NetworkSpec load_model(const std::filesystem::path& manifest);
// Writes `manifest` and a sibling blob (manifest stem + ".bin").
void save_model(const NetworkSpec& net, const std::filesystem::path& manifest);

// Raw float32 input file holding one (C, H, W) tensor.
Tensor load_input(const std::filesystem::path& path, const Shape3& shape);
void save_input(const Tensor& t, const std::filesystem::path& path);

// Activation dump: activations.f32 (all tensors back to back) + activations.json index.
void write_activation_dump(const std::filesystem::path& dir,
                           const std::vector<std::vector<Tensor>>& per_input);
std::vector<std::vector<Tensor>> read_activation_dump(const std::filesystem::path& dir);

std::vector<float> read_f32_file(const std::filesystem::path& path);
void write_f32_file(const std::filesystem::path& path, std::span<const float> data);

} // namespace snnconv
