#include "snnconv/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "snnconv/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace snnconv {

namespace {

// ---------------------------------------------------------------- formatting

std::string fmt_f32(float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string fmt_f64(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ------------------------------------------------------------------ blob I/O

constexpr char kBlobMagic[4] = {'S', 'N', 'N', 'F'};

struct BlobEntry {
    std::string name;
    std::vector<int64_t> dims;
    std::vector<float> data;
};

class ByteReader {
public:
    ByteReader(const std::vector<uint8_t>& bytes, std::string path)
        : bytes_(bytes), path_(std::move(path)) {}

    void need(size_t n, const std::string& what) {
        if (pos_ + n > bytes_.size()) {
            throw_data(path_ + ": truncated file while reading " + what);
        }
    }
    uint8_t u8(const std::string& what) {
        need(1, what);
        return bytes_[pos_++];
    }
    uint16_t u16(const std::string& what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(bytes_[pos_]) |
                     static_cast<uint16_t>(bytes_[pos_ + 1]) << 8;
        pos_ += 2;
        return v;
    }
    uint32_t u32(const std::string& what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(size_t n, const std::string& what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void f32_array(float* dst, size_t count, const std::string& what) {
        need(count * 4, what);
        std::memcpy(dst, bytes_.data() + pos_, count * 4);
        pos_ += count * 4;
    }
    size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& path() const { return path_; }

private:
    const std::vector<uint8_t>& bytes_;
    std::string path_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data(path + ": cannot open file");
    f.seekg(0, std::ios::end);
    const std::streamoff len = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!f) throw_data(path + ": read failed");
    return bytes;
}

void append_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void append_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string encode_blob(const std::vector<BlobEntry>& entries) {
    std::string out;
    out.append(kBlobMagic, 4);
    append_u32(out, kModelFormatVersion);
    append_u32(out, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > 0xffff) throw_data("blob entry name too long: " + e.name);
        if (e.dims.size() > 0xff) throw_data("blob entry rank too large: " + e.name);
        append_u16(out, static_cast<uint16_t>(e.name.size()));
        out.append(e.name);
        out.push_back(0);  // dtype 0 = f32
        out.push_back(static_cast<char>(e.dims.size()));
        int64_t n = 1;
        for (int64_t d : e.dims) {
            append_u32(out, static_cast<uint32_t>(d));
            n *= d;
        }
        if (n != static_cast<int64_t>(e.data.size())) {
            throw_internal("blob entry " + e.name + " dims do not match payload");
        }
        const size_t off = out.size();
        out.resize(off + e.data.size() * 4);
        std::memcpy(out.data() + off, e.data.data(), e.data.size() * 4);
    }
    return out;
}

std::map<std::string, BlobEntry> decode_blob(const std::string& path) {
    const auto bytes = read_file(path);
    ByteReader r(bytes, path);
    const std::string magic = r.str(4, "magic");
    if (std::memcmp(magic.data(), kBlobMagic, 4) != 0) {
        throw_data(path + ": bad magic, not an SNNF weight blob");
    }
    const uint32_t version = r.u32("format version");
    if (version != kModelFormatVersion) {
        throw_data(path + ": unsupported format version " + std::to_string(version));
    }
    const uint32_t count = r.u32("entry count");
    std::map<std::string, BlobEntry> entries;
    for (uint32_t i = 0; i < count; ++i) {
        BlobEntry e;
        const uint16_t name_len = r.u16("entry name length");
        e.name = r.str(name_len, "entry name");
        const uint8_t dtype = r.u8("dtype of " + e.name);
        if (dtype != 0) throw_data(path + ": entry " + e.name + " has unsupported dtype");
        const uint8_t rank = r.u8("rank of " + e.name);
        uint64_t n = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            const uint32_t dim = r.u32("dims of " + e.name);
            n *= dim;
            if (n > (uint64_t{1} << 32)) {
                throw_data(path + ": entry " + e.name + " dimension product implausibly large");
            }
            e.dims.push_back(static_cast<int64_t>(dim));
        }
        // Validate the payload against the actual file length before
        // allocating anything header-sized.
        if (r.remaining() < n * 4) {
            throw_data(path + ": entry " + e.name +
                       " payload is shorter than its declared shape (shape inconsistency)");
        }
        e.data.resize(static_cast<size_t>(n));
        r.f32_array(e.data.data(), static_cast<size_t>(n), "payload of " + e.name);
        if (entries.count(e.name)) throw_data(path + ": duplicate entry name " + e.name);
        entries.emplace(e.name, std::move(e));
    }
    return entries;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw_data(path + ": cannot open for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw_data(path + ": write failed");
}

// -------------------------------------------------------------- manifest I/O

std::string layer_ref(size_t index, const char* attr) {
    return "l" + std::to_string(index) + "." + attr;
}

void emit_layer(std::ostringstream& os, size_t i, const LayerSpec& l,
                std::vector<BlobEntry>& blob) {
    auto put = [&blob](std::string name, const Tensor& t) {
        blob.push_back(BlobEntry{std::move(name), t.shape(),
                                 std::vector<float>(t.data(), t.data() + t.numel())});
    };
    os << "layer " << i << " " << to_string(l.kind);
    switch (l.kind) {
        case LayerKind::Dense: {
            const auto& p = l.as<DenseParams>();
            os << " in=" << p.in_features << " out=" << p.out_features;
            os << " weight=@" << layer_ref(i, "weight") << " bias=@" << layer_ref(i, "bias");
            put(layer_ref(i, "weight"), p.weight);
            put(layer_ref(i, "bias"), p.bias);
            break;
        }
        case LayerKind::Conv2d: {
            const auto& p = l.as<Conv2dParams>();
            os << " in=" << p.in_channels << " out=" << p.out_channels << " kh=" << p.kernel_h
               << " kw=" << p.kernel_w << " sh=" << p.stride_h << " sw=" << p.stride_w
               << " ph=" << p.pad_h << " pw=" << p.pad_w;
            os << " weight=@" << layer_ref(i, "weight") << " bias=@" << layer_ref(i, "bias");
            put(layer_ref(i, "weight"), p.weight);
            put(layer_ref(i, "bias"), p.bias);
            break;
        }
        case LayerKind::PreNeuronMaxPool:
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: {
            const auto& p = l.as<Pool2dParams>();
            os << " kh=" << p.kernel_h << " kw=" << p.kernel_w << " sh=" << p.stride_h
               << " sw=" << p.stride_w;
            break;
        }
        case LayerKind::BatchNorm: {
            const auto& p = l.as<BatchNormParams>();
            os << " channels=" << p.channels << " eps=" << fmt_f32(p.eps);
            os << " gamma=@" << layer_ref(i, "gamma") << " beta=@" << layer_ref(i, "beta")
               << " mean=@" << layer_ref(i, "mean") << " var=@" << layer_ref(i, "var");
            put(layer_ref(i, "gamma"), p.gamma);
            put(layer_ref(i, "beta"), p.beta);
            put(layer_ref(i, "mean"), p.running_mean);
            put(layer_ref(i, "var"), p.running_var);
            break;
        }
        case LayerKind::ResidualAdd: {
            const auto& p = l.as<ResidualAddParams>();
            os << " source=" << p.source;
            if (!p.scale.empty()) {
                os << " scale=@" << layer_ref(i, "scale");
                blob.push_back(BlobEntry{layer_ref(i, "scale"),
                                         {static_cast<int64_t>(p.scale.size())},
                                         p.scale});
            }
            break;
        }
        case LayerKind::Flatten:
            break;
        case LayerKind::Activation: {
            const auto& p = l.as<ActivationParams>();
            if (!p.theta.empty()) {
                os << " theta=@" << layer_ref(i, "theta");
                blob.push_back(BlobEntry{layer_ref(i, "theta"),
                                         {static_cast<int64_t>(p.theta.size())},
                                         p.theta});
            }
            break;
        }
    }
    os << "\n";
}

struct Attr {
    std::string key;
    std::string value;
};

struct ManifestLine {
    std::string head;
    std::vector<std::string> plain;  // bare tokens after the head
    std::vector<Attr> attrs;         // key=value tokens
};

ManifestLine parse_line(const std::string& line) {
    ManifestLine out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (out.head.empty()) {
            out.head = tok;
        } else if (eq == std::string::npos) {
            out.plain.push_back(tok);
        } else {
            out.attrs.push_back(Attr{tok.substr(0, eq), tok.substr(eq + 1)});
        }
    }
    return out;
}

class AttrReader {
public:
    AttrReader(const ManifestLine& line, std::string context)
        : line_(line), context_(std::move(context)) {}

    std::optional<std::string> find(const std::string& key) const {
        for (const auto& a : line_.attrs) {
            if (a.key == key) return a.value;
        }
        return std::nullopt;
    }
    std::string str(const std::string& key) const {
        auto v = find(key);
        if (!v) throw_data(context_ + ": missing attribute '" + key + "'");
        return *v;
    }
    int64_t integer(const std::string& key) const {
        const std::string v = str(key);
        try {
            return std::stoll(v);
        } catch (...) {
            throw_data(context_ + ": attribute '" + key + "' is not an integer: " + v);
        }
    }
    float real(const std::string& key) const {
        const std::string v = str(key);
        try {
            return std::stof(v);
        } catch (...) {
            throw_data(context_ + ": attribute '" + key + "' is not a number: " + v);
        }
    }

private:
    const ManifestLine& line_;
    std::string context_;
};

class BlobResolver {
public:
    BlobResolver(std::map<std::string, BlobEntry> entries, std::string path)
        : entries_(std::move(entries)), path_(std::move(path)) {}

    const BlobEntry& resolve(const std::string& ref, const std::string& context) const {
        if (ref.empty() || ref[0] != '@') {
            throw_data(context + ": weight reference must start with '@', got '" + ref + "'");
        }
        const std::string name = ref.substr(1);
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw_data(context + ": dangling weight reference '" + name + "' (not in " + path_ + ")");
        }
        return it->second;
    }

    Tensor tensor(const std::string& ref, const std::string& context,
                  const std::vector<int64_t>& want_shape) const {
        const BlobEntry& e = resolve(ref, context);
        if (!want_shape.empty() && e.dims != want_shape) {
            throw_data(context + ": entry '" + e.name + "' has shape " + shape_to_string(e.dims) +
                       ", expected " + shape_to_string(want_shape));
        }
        return Tensor(e.dims, e.data);
    }

    std::vector<float> vec(const std::string& ref, const std::string& context) const {
        const BlobEntry& e = resolve(ref, context);
        return e.data;
    }

private:
    std::map<std::string, BlobEntry> entries_;
    std::string path_;
};

}  // namespace

void save_model(const NetworkGraph& g, const std::string& manifest_path,
                const std::string& blob_path) {
    std::vector<BlobEntry> blob;
    std::ostringstream os;
    os << "SNNCONV-MANIFEST " << kModelFormatVersion << "\n";
    os << "activation_mode " << to_string(g.activation_mode) << "\n";
    os << "input_shape";
    for (int64_t d : g.input_shape) os << " " << d;
    os << "\n";
    if (g.t0_estimate >= 0) os << "t0_estimate " << fmt_f64(g.t0_estimate) << "\n";
    if (!g.norm_variant.empty()) os << "norm_variant " << g.norm_variant << "\n";
    if (!g.readout_scale.empty()) {
        os << "readout_scale @readout_scale\n";
        blob.push_back(BlobEntry{"readout_scale",
                                 {static_cast<int64_t>(g.readout_scale.size())},
                                 g.readout_scale});
    }
    os << "layers " << g.layers.size() << "\n";
    for (size_t i = 0; i < g.layers.size(); ++i) emit_layer(os, i, g.layers[i], blob);
    os << "end\n";

    write_file(blob_path, encode_blob(blob));
    write_file(manifest_path, os.str());
}

NetworkGraph load_model(const std::string& manifest_path, const std::string& blob_path) {
    BlobResolver blob(decode_blob(blob_path), blob_path);

    std::ifstream f(manifest_path);
    if (!f) throw_data(manifest_path + ": cannot open file");
    std::string line;
    if (!std::getline(f, line)) throw_data(manifest_path + ": empty manifest");
    {
        const ManifestLine head = parse_line(line);
        if (head.head != "SNNCONV-MANIFEST") {
            throw_data(manifest_path + ": bad magic, not a model manifest");
        }
        if (head.plain.size() != 1 || head.plain[0] != std::to_string(kModelFormatVersion)) {
            throw_data(manifest_path + ": unsupported manifest version");
        }
    }

    NetworkGraph g;
    int64_t declared_layers = -1;
    bool done = false;
    size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const ManifestLine ml = parse_line(line);
        const std::string context = manifest_path + ":" + std::to_string(line_no);
        if (ml.head == "end") {
            done = true;
            break;
        }
        if (ml.head == "activation_mode") {
            if (ml.plain.size() != 1) throw_data(context + ": activation_mode needs one value");
            const std::string& m = ml.plain[0];
            if (m == "relu") g.activation_mode = ActivationMode::ReLU;
            else if (m == "clip") g.activation_mode = ActivationMode::Clip;
            else if (m == "if") g.activation_mode = ActivationMode::IF;
            else throw_data(context + ": unknown activation mode '" + m + "'");
        } else if (ml.head == "input_shape") {
            for (const auto& t : ml.plain) {
                try {
                    g.input_shape.push_back(std::stoll(t));
                } catch (...) {
                    throw_data(context + ": bad input_shape token '" + t + "'");
                }
            }
        } else if (ml.head == "t0_estimate") {
            if (ml.plain.size() != 1) throw_data(context + ": t0_estimate needs one value");
            g.t0_estimate = std::stod(ml.plain[0]);
        } else if (ml.head == "norm_variant") {
            if (ml.plain.size() != 1) throw_data(context + ": norm_variant needs one value");
            g.norm_variant = ml.plain[0];
        } else if (ml.head == "readout_scale") {
            if (ml.plain.size() != 1) throw_data(context + ": readout_scale needs one reference");
            g.readout_scale = blob.vec(ml.plain[0], context);
        } else if (ml.head == "layers") {
            if (ml.plain.size() != 1) throw_data(context + ": layers needs one count");
            declared_layers = std::stoll(ml.plain[0]);
        } else if (ml.head == "layer") {
            if (ml.plain.size() < 2) throw_data(context + ": layer line needs an index and a kind");
            const size_t idx = static_cast<size_t>(std::stoll(ml.plain[0]));
            if (idx != g.layers.size()) {
                throw_data(context + ": layer index " + ml.plain[0] + " out of order");
            }
            const std::string& kind = ml.plain[1];
            AttrReader attrs(ml, context);
            if (kind == "dense") {
                const int64_t in = attrs.integer("in"), out = attrs.integer("out");
                Tensor w = blob.tensor(attrs.str("weight"), context, {out, in});
                Tensor b = blob.tensor(attrs.str("bias"), context, {out});
                g.layers.push_back(make_dense(std::move(w), std::move(b)));
            } else if (kind == "conv2d") {
                const int64_t in = attrs.integer("in"), out = attrs.integer("out");
                const int64_t kh = attrs.integer("kh"), kw = attrs.integer("kw");
                Tensor w = blob.tensor(attrs.str("weight"), context, {out, in, kh, kw});
                Tensor b = blob.tensor(attrs.str("bias"), context, {out});
                g.layers.push_back(make_conv2d(std::move(w), std::move(b), attrs.integer("sh"),
                                               attrs.integer("sw"), attrs.integer("ph"),
                                               attrs.integer("pw")));
            } else if (kind == "maxpool" || kind == "pre_maxpool" || kind == "avgpool") {
                LayerSpec l = make_maxpool(attrs.integer("kh"), attrs.integer("kw"),
                                           attrs.integer("sh"), attrs.integer("sw"));
                l.kind = kind == "maxpool"      ? LayerKind::MaxPool
                         : kind == "avgpool"    ? LayerKind::AvgPool
                                                : LayerKind::PreNeuronMaxPool;
                g.layers.push_back(std::move(l));
            } else if (kind == "batchnorm") {
                const int64_t c = attrs.integer("channels");
                g.layers.push_back(make_batchnorm(
                    blob.tensor(attrs.str("gamma"), context, {c}),
                    blob.tensor(attrs.str("beta"), context, {c}),
                    blob.tensor(attrs.str("mean"), context, {c}),
                    blob.tensor(attrs.str("var"), context, {c}), attrs.real("eps")));
            } else if (kind == "residual_add") {
                std::vector<float> scale;
                if (attrs.find("scale")) scale = blob.vec(attrs.str("scale"), context);
                g.layers.push_back(make_residual_add(attrs.integer("source"), std::move(scale)));
            } else if (kind == "flatten") {
                g.layers.push_back(make_flatten());
            } else if (kind == "activation") {
                LayerSpec l = make_activation();
                if (attrs.find("theta")) {
                    l.as<ActivationParams>().theta = blob.vec(attrs.str("theta"), context);
                }
                g.layers.push_back(std::move(l));
            } else {
                throw_data(context + ": unknown layer kind '" + kind + "'");
            }
        } else {
            throw_data(context + ": unknown manifest directive '" + ml.head + "'");
        }
    }
    if (!done) throw_data(manifest_path + ": missing 'end' line");
    if (declared_layers >= 0 && declared_layers != static_cast<int64_t>(g.layers.size())) {
        throw_data(manifest_path + ": declared " + std::to_string(declared_layers) +
                   " layers but found " + std::to_string(g.layers.size()));
    }
    validate_graph(g);
    return g;
}

}  // namespace snnconv
