#include "snnconv/tensor.hpp"

#include <cmath>
#include <sstream>

#include "snnconv/errors.hpp"

namespace snnconv {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw_data("negative dimension in shape " + shape_to_string(shape));
        if (d != 0 && n > (int64_t{1} << 40) / (d == 0 ? 1 : d)) {
            throw_data("shape " + shape_to_string(shape) + " exceeds supported element count");
        }
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> values) : shape_(std::move(shape)) {
    const int64_t n = shape_numel(shape_);
    if (n != static_cast<int64_t>(values.size())) {
        throw_data("tensor data length " + std::to_string(values.size()) +
                   " does not match shape " + shape_to_string(shape_));
    }
    data_ = std::move(values);
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

int64_t Tensor::dim(size_t axis) const {
    if (axis >= shape_.size()) {
        throw_internal("tensor axis " + std::to_string(axis) + " out of range for shape " +
                       shape_to_string(shape_));
    }
    return shape_[axis];
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw_internal("reshape " + shape_to_string(shape_) + " -> " + shape_to_string(new_shape) +
                       " changes element count");
    }
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
}

}  // namespace snnconv
