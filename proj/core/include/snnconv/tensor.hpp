#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace snnconv {

/// Dense row-major float32 array. Streams are laid out as
/// (batch, channel, height, width) for image data and (batch, feature)
/// for flat data.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, std::vector<float> values);

    static Tensor full(std::vector<int64_t> shape, float value);

    const std::vector<int64_t>& shape() const noexcept { return shape_; }
    int64_t dim(size_t axis) const;
    size_t rank() const noexcept { return shape_.size(); }
    int64_t numel() const noexcept { return static_cast<int64_t>(data_.size()); }
    bool empty() const noexcept { return data_.empty(); }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    // Same data, new shape; element counts must match.
    Tensor reshaped(std::vector<int64_t> new_shape) const;

private:
    std::vector<int64_t> shape_;
    std::vector<float> data_;
};

// Checked product of dimensions; rejects negatives and overflow.
int64_t shape_numel(const std::vector<int64_t>& shape);

std::string shape_to_string(const std::vector<int64_t>& shape);

}  // namespace snnconv
