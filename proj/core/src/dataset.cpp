#include "snnconv/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "snnconv/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace snnconv {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'N', 'D'};
constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeU32 = 1;

struct Header {
    uint8_t dtype = 0;
    std::vector<int64_t> dims;
};

Header read_header(std::ifstream& f, const std::string& path) {
    char magic[4];
    uint8_t dtype = 0, rank = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&dtype), 1);
    f.read(reinterpret_cast<char*>(&rank), 1);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) {
        throw_data(path + ": bad magic, not an SNND dataset");
    }
    Header h;
    h.dtype = dtype;
    for (uint8_t i = 0; i < rank; ++i) {
        uint32_t d = 0;
        f.read(reinterpret_cast<char*>(&d), 4);
        if (!f) throw_data(path + ": truncated header");
        h.dims.push_back(static_cast<int64_t>(d));
    }
    return h;
}

int64_t payload_elements(const Header& h, std::ifstream& f, const std::string& path) {
    const int64_t n = shape_numel(h.dims);
    // Check declared size against the bytes actually present before
    // allocating.
    const std::streamoff here = f.tellg();
    f.seekg(0, std::ios::end);
    const std::streamoff end = f.tellg();
    f.seekg(here);
    if (end - here != static_cast<std::streamoff>(n) * 4) {
        throw_data(path + ": payload length does not match header shape " +
                   shape_to_string(h.dims));
    }
    return n;
}

}  // namespace

Tensor load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data(path + ": cannot open file");
    const Header h = read_header(f, path);
    if (h.dtype != kDtypeF32) throw_data(path + ": expected an f32 dataset");
    if (h.dims.empty()) throw_data(path + ": dataset needs at least a sample dimension");
    const int64_t n = payload_elements(h, f, path);
    std::vector<float> data(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(data.data()), n * 4);
    if (!f) throw_data(path + ": read failed");
    return Tensor(h.dims, std::move(data));
}

void save_dataset(const std::string& path, const Tensor& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw_data(path + ": cannot open for writing");
    f.write(kMagic, 4);
    const uint8_t dtype = kDtypeF32;
    const uint8_t rank = static_cast<uint8_t>(data.rank());
    f.write(reinterpret_cast<const char*>(&dtype), 1);
    f.write(reinterpret_cast<const char*>(&rank), 1);
    for (int64_t d : data.shape()) {
        const uint32_t v = static_cast<uint32_t>(d);
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    f.write(reinterpret_cast<const char*>(data.data()), data.numel() * 4);
    if (!f) throw_data(path + ": write failed");
}

std::vector<uint32_t> load_labels(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data(path + ": cannot open file");
    const Header h = read_header(f, path);
    if (h.dtype != kDtypeU32 || h.dims.size() != 1) {
        throw_data(path + ": expected a rank-1 u32 label file");
    }
    const int64_t n = payload_elements(h, f, path);
    std::vector<uint32_t> labels(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(labels.data()), n * 4);
    if (!f) throw_data(path + ": read failed");
    return labels;
}

void save_labels(const std::string& path, const std::vector<uint32_t>& labels) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw_data(path + ": cannot open for writing");
    f.write(kMagic, 4);
    const uint8_t dtype = kDtypeU32;
    const uint8_t rank = 1;
    f.write(reinterpret_cast<const char*>(&dtype), 1);
    f.write(reinterpret_cast<const char*>(&rank), 1);
    const uint32_t n = static_cast<uint32_t>(labels.size());
    f.write(reinterpret_cast<const char*>(&n), 4);
    f.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()) * 4);
    if (!f) throw_data(path + ": write failed");
}

Batcher::Batcher(const Tensor& data, int64_t batch_size, std::optional<uint64_t> shuffle_seed)
    : data_(&data), batch_size_(batch_size), seed_(shuffle_seed) {
    if (batch_size < 1) throw_usage("batch size must be >= 1");
    if (data.rank() < 1 || data.dim(0) < 1) throw_data("dataset is empty");
    samples_ = data.dim(0);
    per_sample_ = data.numel() / samples_;
    start_epoch();
}

int64_t Batcher::batches_per_epoch() const {
    return (samples_ + batch_size_ - 1) / batch_size_;
}

void Batcher::reset() {
    epoch_ = 0;
    cursor_ = 0;
    start_epoch();
}

void Batcher::start_epoch() {
    order_.resize(static_cast<size_t>(samples_));
    std::iota(order_.begin(), order_.end(), int64_t{0});
    if (!seed_) return;
    // Explicit Fisher-Yates with a splitmix-style generator, so the
    // permutation depends only on (seed, epoch).
    uint64_t s = *seed_ + 0x9e3779b97f4a7c15ull * static_cast<uint64_t>(epoch_ + 1);
    auto next_u64 = [&s]() {
        s += 0x9e3779b97f4a7c15ull;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    for (int64_t i = samples_ - 1; i > 0; --i) {
        const uint64_t j = next_u64() % static_cast<uint64_t>(i + 1);
        std::swap(order_[static_cast<size_t>(i)], order_[j]);
    }
}

Tensor Batcher::next() {
    if (cursor_ >= samples_) {
        cursor_ = 0;
        ++epoch_;
        start_epoch();
    }
    const int64_t count = std::min(batch_size_, samples_ - cursor_);
    std::vector<int64_t> shape = data_->shape();
    shape[0] = count;
    Tensor batch(shape);
    for (int64_t b = 0; b < count; ++b) {
        const int64_t src = order_[static_cast<size_t>(cursor_ + b)];
        std::memcpy(batch.data() + b * per_sample_, data_->data() + src * per_sample_,
                    static_cast<size_t>(per_sample_) * 4);
    }
    cursor_ += count;
    return batch;
}

}  // namespace snnconv
