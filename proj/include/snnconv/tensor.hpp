// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace snnconv {

// Feature-map geometry. Tensors are stored channel-major (C, H, W), row-major.
// A dense layer's output is a (units, 1, 1) map.
struct Shape3 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const noexcept { return channels * height * width; }
    std::size_t plane() const noexcept { return height * width; }
    bool operator==(const Shape3&) const = default;

    std::string to_string() const;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, float fill = 0.0f);
    Tensor(std::vector<std::size_t> shape, std::vector<float> data);

    static Tensor of(const Shape3& s, float fill = 0.0f);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    // Interprets the shape as (C, H, W); rank-1 shapes are (N, 1, 1).
    Shape3 as_shape3() const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

} // namespace snnconv
