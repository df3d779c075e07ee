#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "snnconv/tensor.hpp"

namespace snnconv {

enum class ActivationMode { ReLU, Clip, IF };

enum class LayerKind {
    Dense,
    Conv2d,
    PreNeuronMaxPool,
    MaxPool,
    AvgPool,
    BatchNorm,
    ResidualAdd,
    Flatten,
    Activation,
};

const char* to_string(ActivationMode mode);
const char* to_string(LayerKind kind);

struct DenseParams {
    int64_t in_features = 0;
    int64_t out_features = 0;
    Tensor weight;  // (out_features, in_features)
    Tensor bias;    // (out_features)
};

struct Conv2dParams {
    int64_t in_channels = 0;
    int64_t out_channels = 0;
    int64_t kernel_h = 0, kernel_w = 0;
    int64_t stride_h = 1, stride_w = 1;
    int64_t pad_h = 0, pad_w = 0;
    Tensor weight;  // (out_channels, in_channels, kernel_h, kernel_w)
    Tensor bias;    // (out_channels)
};

struct Pool2dParams {
    int64_t kernel_h = 0, kernel_w = 0;
    int64_t stride_h = 0, stride_w = 0;
};

struct BatchNormParams {
    int64_t channels = 0;
    Tensor gamma, beta, running_mean, running_var;  // each (channels)
    float eps = 1e-5f;
};

struct ResidualAddParams {
    int64_t source = -1;        // index of an earlier layer whose output is added
    std::vector<float> scale;   // per-channel factor on the tapped branch; empty = 1
};

struct FlattenParams {};

/// One activation slot. `theta` has length 1 (layer-wise), or channel count
/// for image streams / feature count for flat streams (channel-wise). Empty
/// in ReLU mode.
struct ActivationParams {
    std::vector<float> theta;
    int64_t channel_count = 0;  // filled in by validate_graph
};

struct LayerSpec {
    LayerKind kind = LayerKind::Flatten;
    std::variant<DenseParams, Conv2dParams, Pool2dParams, BatchNormParams, ResidualAddParams,
                 FlattenParams, ActivationParams>
        params;

    template <class T>
    T& as() {
        return std::get<T>(params);
    }
    template <class T>
    const T& as() const {
        return std::get<T>(params);
    }
};

/// Ordered layer graph shared by the ReLU, clipped and spiking execution
/// modes. `input_shape` excludes the batch dimension.
struct NetworkGraph {
    std::vector<LayerSpec> layers;
    ActivationMode activation_mode = ActivationMode::ReLU;
    std::vector<int64_t> input_shape;

    // Per-element factor that recovers original output magnitudes after
    // threshold absorption rescaled a trailing activation. Empty = identity.
    std::vector<float> readout_scale;

    // Conversion metadata carried through the manifest.
    double t0_estimate = -1.0;  // < 0 means unset
    std::string norm_variant;
};

// Convenience builders used by tools and tests.
LayerSpec make_dense(Tensor weight, Tensor bias);
LayerSpec make_conv2d(Tensor weight, Tensor bias, int64_t stride_h, int64_t stride_w,
                      int64_t pad_h, int64_t pad_w);
LayerSpec make_maxpool(int64_t kernel_h, int64_t kernel_w, int64_t stride_h, int64_t stride_w);
LayerSpec make_preneuron_maxpool(int64_t kernel_h, int64_t kernel_w, int64_t stride_h,
                                 int64_t stride_w);
LayerSpec make_avgpool(int64_t kernel_h, int64_t kernel_w, int64_t stride_h, int64_t stride_w);
LayerSpec make_batchnorm(Tensor gamma, Tensor beta, Tensor mean, Tensor var, float eps);
LayerSpec make_residual_add(int64_t source, std::vector<float> scale = {});
LayerSpec make_flatten();
LayerSpec make_activation();

/// Output shape of every layer (batch dimension excluded). Throws a data
/// error naming the first inconsistent layer.
std::vector<std::vector<int64_t>> infer_layer_shapes(const NetworkGraph& g);

/// Structural validation; fills ActivationParams::channel_count from the
/// inferred shapes and checks weight/threshold/residual consistency.
void validate_graph(NetworkGraph& g);

std::vector<size_t> activation_layer_indices(const NetworkGraph& g);

/// Theta value for channel `c` of a slot, honoring length-1 broadcast.
float slot_theta(const ActivationParams& slot, int64_t channel);

}  // namespace snnconv
