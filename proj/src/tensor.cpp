// SPDX-License-Identifier: Apache-2.0
#include "snnconv/tensor.hpp"

#include "snnconv/error.hpp"

#include <functional>
#include <numeric>

namespace snnconv {

std::string Shape3::to_string() const {
    return "(" + std::to_string(channels) + ", " + std::to_string(height) + ", " +
           std::to_string(width) + ")";
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        return 0;
    }
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, float fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_product(shape_)) {
        throw InputError("tensor", "data length " + std::to_string(data_.size()) +
                                       " does not match shape product " +
                                       std::to_string(shape_product(shape_)));
    }
}

Tensor Tensor::of(const Shape3& s, float fill) {
    return Tensor({s.channels, s.height, s.width}, fill);
}

Shape3 Tensor::as_shape3() const {
    switch (shape_.size()) {
    case 1:
        return {shape_[0], 1, 1};
    case 3:
        return {shape_[0], shape_[1], shape_[2]};
    default:
        throw InputError("tensor", "expected rank 1 or 3 tensor, got rank " +
                                       std::to_string(shape_.size()));
    }
}

} // namespace snnconv
