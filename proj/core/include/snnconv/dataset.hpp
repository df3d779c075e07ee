#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snnconv/tensor.hpp"

namespace snnconv {

// SNND container: magic "SNND", dtype tag (0 = f32, 1 = u32), rank,
// u32 dims with dim0 = sample count, then the little-endian payload.
// Labels are stored as a parallel u32 rank-1 container.

Tensor load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Tensor& data);

std::vector<uint32_t> load_labels(const std::string& path);
void save_labels(const std::string& path, const std::vector<uint32_t>& labels);

/// Deterministic batch iterator. Unshuffled it yields file order; with a
/// seed, sample order is a Fisher-Yates permutation re-drawn per epoch from
/// (seed, epoch). Each epoch yields ceil(N / batch_size) batches, the last
/// possibly short.
class Batcher {
public:
    Batcher(const Tensor& data, int64_t batch_size,
            std::optional<uint64_t> shuffle_seed = std::nullopt);

    int64_t sample_count() const { return samples_; }
    int64_t batches_per_epoch() const;

    /// Next batch, crossing epoch boundaries transparently.
    Tensor next();

    /// Restart from the first batch of epoch 0.
    void reset();

private:
    void start_epoch();

    const Tensor* data_;
    int64_t batch_size_;
    std::optional<uint64_t> seed_;
    int64_t samples_ = 0;
    int64_t per_sample_ = 0;
    int64_t cursor_ = 0;
    int64_t epoch_ = 0;
    std::vector<int64_t> order_;
};

}  // namespace snnconv
