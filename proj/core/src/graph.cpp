#include "snnconv/graph.hpp"

#include <string>

#include "snnconv/errors.hpp"

namespace snnconv {

const char* to_string(ActivationMode mode) {
    switch (mode) {
        case ActivationMode::ReLU: return "relu";
        case ActivationMode::Clip: return "clip";
        case ActivationMode::IF: return "if";
    }
    return "?";
}

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::PreNeuronMaxPool: return "pre_maxpool";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::AvgPool: return "avgpool";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::ResidualAdd: return "residual_add";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Activation: return "activation";
    }
    return "?";
}

LayerSpec make_dense(Tensor weight, Tensor bias) {
    DenseParams p;
    if (weight.rank() != 2) throw_data("dense weight must be rank 2, got " + shape_to_string(weight.shape()));
    p.out_features = weight.dim(0);
    p.in_features = weight.dim(1);
    p.weight = std::move(weight);
    p.bias = std::move(bias);
    return LayerSpec{LayerKind::Dense, std::move(p)};
}

LayerSpec make_conv2d(Tensor weight, Tensor bias, int64_t stride_h, int64_t stride_w,
                      int64_t pad_h, int64_t pad_w) {
    Conv2dParams p;
    if (weight.rank() != 4) throw_data("conv weight must be rank 4, got " + shape_to_string(weight.shape()));
    p.out_channels = weight.dim(0);
    p.in_channels = weight.dim(1);
    p.kernel_h = weight.dim(2);
    p.kernel_w = weight.dim(3);
    p.stride_h = stride_h;
    p.stride_w = stride_w;
    p.pad_h = pad_h;
    p.pad_w = pad_w;
    p.weight = std::move(weight);
    p.bias = std::move(bias);
    return LayerSpec{LayerKind::Conv2d, std::move(p)};
}

static LayerSpec make_pool(LayerKind kind, int64_t kh, int64_t kw, int64_t sh, int64_t sw) {
    Pool2dParams p;
    p.kernel_h = kh;
    p.kernel_w = kw;
    p.stride_h = sh;
    p.stride_w = sw;
    return LayerSpec{kind, std::move(p)};
}

LayerSpec make_maxpool(int64_t kh, int64_t kw, int64_t sh, int64_t sw) {
    return make_pool(LayerKind::MaxPool, kh, kw, sh, sw);
}
LayerSpec make_preneuron_maxpool(int64_t kh, int64_t kw, int64_t sh, int64_t sw) {
    return make_pool(LayerKind::PreNeuronMaxPool, kh, kw, sh, sw);
}
LayerSpec make_avgpool(int64_t kh, int64_t kw, int64_t sh, int64_t sw) {
    return make_pool(LayerKind::AvgPool, kh, kw, sh, sw);
}

LayerSpec make_batchnorm(Tensor gamma, Tensor beta, Tensor mean, Tensor var, float eps) {
    BatchNormParams p;
    p.channels = gamma.numel();
    p.gamma = std::move(gamma);
    p.beta = std::move(beta);
    p.running_mean = std::move(mean);
    p.running_var = std::move(var);
    p.eps = eps;
    return LayerSpec{LayerKind::BatchNorm, std::move(p)};
}

LayerSpec make_residual_add(int64_t source, std::vector<float> scale) {
    ResidualAddParams p;
    p.source = source;
    p.scale = std::move(scale);
    return LayerSpec{LayerKind::ResidualAdd, std::move(p)};
}

LayerSpec make_flatten() { return LayerSpec{LayerKind::Flatten, FlattenParams{}}; }

LayerSpec make_activation() { return LayerSpec{LayerKind::Activation, ActivationParams{}}; }

float slot_theta(const ActivationParams& slot, int64_t channel) {
    if (slot.theta.size() == 1) return slot.theta[0];
    return slot.theta[static_cast<size_t>(channel)];
}

namespace {

[[noreturn]] void layer_error(size_t index, const std::string& what) {
    throw_data("layer " + std::to_string(index) + ": " + what);
}

bool kind_matches_params(const LayerSpec& l) {
    switch (l.kind) {
        case LayerKind::Dense: return std::holds_alternative<DenseParams>(l.params);
        case LayerKind::Conv2d: return std::holds_alternative<Conv2dParams>(l.params);
        case LayerKind::PreNeuronMaxPool:
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: return std::holds_alternative<Pool2dParams>(l.params);
        case LayerKind::BatchNorm: return std::holds_alternative<BatchNormParams>(l.params);
        case LayerKind::ResidualAdd: return std::holds_alternative<ResidualAddParams>(l.params);
        case LayerKind::Flatten: return std::holds_alternative<FlattenParams>(l.params);
        case LayerKind::Activation: return std::holds_alternative<ActivationParams>(l.params);
    }
    return false;
}

}  // namespace

std::vector<std::vector<int64_t>> infer_layer_shapes(const NetworkGraph& g) {
    std::vector<std::vector<int64_t>> shapes;
    shapes.reserve(g.layers.size());
    std::vector<int64_t> cur = g.input_shape;
    if (cur.empty()) throw_data("graph has no input shape");

    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        if (!kind_matches_params(l)) layer_error(i, "layer kind does not match its parameters");
        switch (l.kind) {
            case LayerKind::Dense: {
                const auto& p = l.as<DenseParams>();
                if (cur.size() != 1) layer_error(i, "dense expects a flat stream, got " + shape_to_string(cur));
                if (cur[0] != p.in_features) {
                    layer_error(i, "dense expects " + std::to_string(p.in_features) +
                                       " input features, stream has " + std::to_string(cur[0]));
                }
                cur = {p.out_features};
                break;
            }
            case LayerKind::Conv2d: {
                const auto& p = l.as<Conv2dParams>();
                if (cur.size() != 3) layer_error(i, "conv expects a (C,H,W) stream, got " + shape_to_string(cur));
                if (cur[0] != p.in_channels) {
                    layer_error(i, "conv expects " + std::to_string(p.in_channels) +
                                       " input channels, stream has " + std::to_string(cur[0]));
                }
                if (p.stride_h < 1 || p.stride_w < 1) layer_error(i, "conv stride must be >= 1");
                const int64_t oh = (cur[1] + 2 * p.pad_h - p.kernel_h) / p.stride_h + 1;
                const int64_t ow = (cur[2] + 2 * p.pad_w - p.kernel_w) / p.stride_w + 1;
                if (oh < 1 || ow < 1) layer_error(i, "conv output would be empty");
                cur = {p.out_channels, oh, ow};
                break;
            }
            case LayerKind::PreNeuronMaxPool:
            case LayerKind::MaxPool:
            case LayerKind::AvgPool: {
                const auto& p = l.as<Pool2dParams>();
                if (cur.size() != 3) layer_error(i, "pool expects a (C,H,W) stream, got " + shape_to_string(cur));
                if (p.kernel_h < 1 || p.kernel_w < 1 || p.stride_h < 1 || p.stride_w < 1) {
                    layer_error(i, "pool kernel and stride must be >= 1");
                }
                const int64_t oh = (cur[1] - p.kernel_h) / p.stride_h + 1;
                const int64_t ow = (cur[2] - p.kernel_w) / p.stride_w + 1;
                if (oh < 1 || ow < 1) layer_error(i, "pool output would be empty");
                cur = {cur[0], oh, ow};
                break;
            }
            case LayerKind::BatchNorm: {
                const auto& p = l.as<BatchNormParams>();
                const int64_t c = cur.size() == 3 ? cur[0] : cur.size() == 1 ? cur[0] : -1;
                if (c < 0) layer_error(i, "batchnorm expects a flat or (C,H,W) stream");
                if (c != p.channels) {
                    layer_error(i, "batchnorm has " + std::to_string(p.channels) +
                                       " channels, stream has " + std::to_string(c));
                }
                break;
            }
            case LayerKind::ResidualAdd: {
                const auto& p = l.as<ResidualAddParams>();
                if (p.source < 0 || static_cast<size_t>(p.source) >= i) {
                    layer_error(i, "residual source must name an earlier layer");
                }
                if (shapes[static_cast<size_t>(p.source)] != cur) {
                    layer_error(i, "residual source shape " +
                                       shape_to_string(shapes[static_cast<size_t>(p.source)]) +
                                       " does not match stream " + shape_to_string(cur));
                }
                break;
            }
            case LayerKind::Flatten: {
                cur = {shape_numel(cur)};
                break;
            }
            case LayerKind::Activation:
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

void validate_graph(NetworkGraph& g) {
    const auto shapes = infer_layer_shapes(g);
    for (size_t i = 0; i < g.layers.size(); ++i) {
        LayerSpec& l = g.layers[i];
        const std::vector<int64_t>& in =
            i == 0 ? g.input_shape : shapes[i - 1];
        switch (l.kind) {
            case LayerKind::Dense: {
                auto& p = l.as<DenseParams>();
                if (p.weight.shape() != std::vector<int64_t>{p.out_features, p.in_features}) {
                    layer_error(i, "dense weight shape " + shape_to_string(p.weight.shape()) +
                                       " inconsistent with declared features");
                }
                if (p.bias.numel() != p.out_features) layer_error(i, "dense bias length mismatch");
                break;
            }
            case LayerKind::Conv2d: {
                auto& p = l.as<Conv2dParams>();
                const std::vector<int64_t> want{p.out_channels, p.in_channels, p.kernel_h, p.kernel_w};
                if (p.weight.shape() != want) {
                    layer_error(i, "conv weight shape " + shape_to_string(p.weight.shape()) +
                                       " inconsistent with declared channels/kernel");
                }
                if (p.bias.numel() != p.out_channels) layer_error(i, "conv bias length mismatch");
                break;
            }
            case LayerKind::BatchNorm: {
                auto& p = l.as<BatchNormParams>();
                if (p.gamma.numel() != p.channels || p.beta.numel() != p.channels ||
                    p.running_mean.numel() != p.channels || p.running_var.numel() != p.channels) {
                    layer_error(i, "batchnorm parameter length mismatch");
                }
                break;
            }
            case LayerKind::ResidualAdd: {
                auto& p = l.as<ResidualAddParams>();
                const int64_t c = in.size() == 3 ? in[0] : in[0];
                if (!p.scale.empty() && static_cast<int64_t>(p.scale.size()) != 1 &&
                    static_cast<int64_t>(p.scale.size()) != c) {
                    layer_error(i, "residual scale length must be 1 or the channel count");
                }
                break;
            }
            case LayerKind::Activation: {
                auto& p = l.as<ActivationParams>();
                p.channel_count = in[0];
                if (!p.theta.empty() && p.theta.size() != 1 &&
                    static_cast<int64_t>(p.theta.size()) != p.channel_count) {
                    layer_error(i, "theta length must be 1 or " + std::to_string(p.channel_count));
                }
                if (g.activation_mode != ActivationMode::ReLU && p.theta.empty()) {
                    layer_error(i, "activation has no thresholds in " +
                                       std::string(to_string(g.activation_mode)) + " mode");
                }
                break;
            }
            default:
                break;
        }
    }
    if (!g.readout_scale.empty() && !g.layers.empty()) {
        const int64_t out = shape_numel(shapes.back());
        if (static_cast<int64_t>(g.readout_scale.size()) != out &&
            g.readout_scale.size() != 1) {
            throw_data("readout scale length " + std::to_string(g.readout_scale.size()) +
                       " does not match output element count " + std::to_string(out));
        }
    }
}

std::vector<size_t> activation_layer_indices(const NetworkGraph& g) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (g.layers[i].kind == LayerKind::Activation) idx.push_back(i);
    }
    return idx;
}

}  // namespace snnconv
