// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "snnconv/netspec.hpp"

#include <cstdint>
#include <vector>

namespace snnconv::fixtures {

struct RandomNetOptions {
    Shape3 input_shape{3, 6, 6};
    std::size_t min_layers = 2;  // weighted layers, output included
    std::size_t max_layers = 4;
    std::size_t max_channels = 32;
    bool batchnorm = false;
    bool maxpool = true;
    float alpha = 0.01f;
};

// Random conv/pool/dense topology ending in a linear dense head.
NetworkSpec random_network(std::uint64_t seed, const RandomNetOptions& opts = {});

// Inputs drawn uniformly from [lo, hi].
std::vector<Tensor> random_inputs(const Shape3& shape, std::size_t count, std::uint64_t seed,
                                  float lo = 0.0f, float hi = 1.0f);

// A network whose first layer has one channel with a maximum activation about
// 100x below the layer maximum; the next layer amplifies that channel back so
// its information matters for the output.
struct SkewedFixture {
    NetworkSpec net;
    std::vector<Tensor> calibration;
    std::vector<Tensor> evaluation;
    std::size_t skewed_layer = 0;
    std::size_t skewed_channel = 0;
    float skew = 0.01f;
};

SkewedFixture skewed_fixture(std::uint64_t seed, std::size_t calibration_count = 32,
                             std::size_t evaluation_count = 8);

} // namespace snnconv::fixtures
