#include "snnconv/transforms.hpp"

#include <cmath>
#include <string>

#include "snnconv/errors.hpp"

namespace snnconv {

namespace {

void scale_linear_output(LayerSpec& l, const std::vector<float>& scale,
                         const std::vector<float>& shift) {
    if (l.kind == LayerKind::Dense) {
        auto& p = l.as<DenseParams>();
        for (int64_t o = 0; o < p.out_features; ++o) {
            float* row = p.weight.data() + o * p.in_features;
            const float s = scale[static_cast<size_t>(o)];
            for (int64_t i = 0; i < p.in_features; ++i) row[i] *= s;
            p.bias[o] = p.bias[o] * s + shift[static_cast<size_t>(o)];
        }
        return;
    }
    auto& p = l.as<Conv2dParams>();
    const int64_t per_out = p.in_channels * p.kernel_h * p.kernel_w;
    for (int64_t o = 0; o < p.out_channels; ++o) {
        float* k = p.weight.data() + o * per_out;
        const float s = scale[static_cast<size_t>(o)];
        for (int64_t i = 0; i < per_out; ++i) k[i] *= s;
        p.bias[o] = p.bias[o] * s + shift[static_cast<size_t>(o)];
    }
}

}  // namespace

NetworkGraph fold_batchnorm(const NetworkGraph& g) {
    NetworkGraph out = g;
    out.layers.clear();
    // old layer index -> new index of the layer producing the same values
    std::vector<int64_t> remap(g.layers.size(), -1);

    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        if (l.kind != LayerKind::BatchNorm) {
            remap[i] = static_cast<int64_t>(out.layers.size());
            out.layers.push_back(l);
            continue;
        }
        if (out.layers.empty() || (out.layers.back().kind != LayerKind::Dense &&
                                   out.layers.back().kind != LayerKind::Conv2d)) {
            throw_data("layer " + std::to_string(i) +
                       ": batchnorm must directly follow a dense or conv layer to be folded");
        }
        const auto& p = l.as<BatchNormParams>();
        std::vector<float> scale(static_cast<size_t>(p.channels));
        std::vector<float> shift(static_cast<size_t>(p.channels));
        for (int64_t c = 0; c < p.channels; ++c) {
            const float inv_std = 1.0f / std::sqrt(p.running_var[c] + p.eps);
            scale[static_cast<size_t>(c)] = p.gamma[c] * inv_std;
            shift[static_cast<size_t>(c)] =
                p.beta[c] - p.running_mean[c] * p.gamma[c] * inv_std;
        }
        scale_linear_output(out.layers.back(), scale, shift);
        // The folded linear layer now produces this BatchNorm's values.
        remap[i] = static_cast<int64_t>(out.layers.size()) - 1;
    }

    for (auto& l : out.layers) {
        if (l.kind != LayerKind::ResidualAdd) continue;
        auto& p = l.as<ResidualAddParams>();
        p.source = remap[static_cast<size_t>(p.source)];
    }
    validate_graph(out);
    return out;
}

NetworkGraph rewrite_preneuron_maxpool(const NetworkGraph& g) {
    if (g.activation_mode != ActivationMode::ReLU) {
        throw_data("pre-neuron max pooling rewrite requires a relu-mode graph");
    }
    NetworkGraph out = g;
    for (size_t i = 0; i + 1 < out.layers.size(); ++i) {
        if (out.layers[i].kind == LayerKind::Activation &&
            out.layers[i + 1].kind == LayerKind::MaxPool) {
            LayerSpec pool = out.layers[i + 1];
            pool.kind = LayerKind::PreNeuronMaxPool;
            LayerSpec act = out.layers[i];
            // Swapped in place: the activation keeps index i+1, so residual
            // taps of the pooled activation stay valid. Taps of the
            // pre-pool activation output have no equivalent node afterward.
            for (const auto& l : out.layers) {
                if (l.kind != LayerKind::ResidualAdd) continue;
                if (l.as<ResidualAddParams>().source == static_cast<int64_t>(i)) {
                    throw_data("residual source taps an activation that feeds max pooling; "
                               "cannot rewrite pre-neuron");
                }
            }
            out.layers[i] = std::move(pool);
            out.layers[i + 1] = std::move(act);
        }
    }
    // A max pool with no activation in front already sees pre-neuron
    // currents; only its label changes.
    for (auto& l : out.layers) {
        if (l.kind == LayerKind::MaxPool) l.kind = LayerKind::PreNeuronMaxPool;
    }
    validate_graph(out);
    return out;
}

}  // namespace snnconv
