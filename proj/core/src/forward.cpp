#include "snnconv/forward.hpp"

#include <string>

#include "snnconv/errors.hpp"
#include "snnconv/layer_ops.hpp"

namespace snnconv {

ForwardResult forward_ann(const NetworkGraph& g, const Tensor& batch) {
    if (g.activation_mode == ActivationMode::IF) {
        throw_data("forward_ann requires relu or clip mode; simulate IF graphs instead");
    }
    if (batch.rank() != g.input_shape.size() + 1) {
        throw_data("batch rank " + std::to_string(batch.rank()) + " does not match input shape " +
                   shape_to_string(g.input_shape));
    }
    for (size_t d = 0; d < g.input_shape.size(); ++d) {
        if (batch.dim(d + 1) != g.input_shape[d]) {
            throw_data("batch shape " + shape_to_string(batch.shape()) +
                       " does not match graph input " + shape_to_string(g.input_shape));
        }
    }

    ForwardResult r;
    r.layer_outputs.reserve(g.layers.size());
    const Tensor* cur = &batch;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        Tensor out;
        try {
            switch (l.kind) {
                case LayerKind::Dense: out = apply_dense(l.as<DenseParams>(), *cur); break;
                case LayerKind::Conv2d: out = apply_conv2d(l.as<Conv2dParams>(), *cur); break;
                case LayerKind::PreNeuronMaxPool:
                case LayerKind::MaxPool: out = apply_maxpool(l.as<Pool2dParams>(), *cur); break;
                case LayerKind::AvgPool: out = apply_avgpool(l.as<Pool2dParams>(), *cur); break;
                case LayerKind::BatchNorm: out = apply_batchnorm(l.as<BatchNormParams>(), *cur); break;
                case LayerKind::ResidualAdd: {
                    const auto& p = l.as<ResidualAddParams>();
                    if (p.source < 0 || static_cast<size_t>(p.source) >= i) {
                        throw_data("residual source must name an earlier layer");
                    }
                    out = apply_residual_add(p, *cur, r.layer_outputs[static_cast<size_t>(p.source)]);
                    break;
                }
                case LayerKind::Flatten: out = apply_flatten(*cur); break;
                case LayerKind::Activation:
                    out = g.activation_mode == ActivationMode::ReLU
                              ? apply_relu(*cur)
                              : apply_clip(l.as<ActivationParams>(), *cur);
                    break;
            }
        } catch (const Error& e) {
            throw Error(e.kind(), "layer " + std::to_string(i) + " (" + to_string(l.kind) +
                                      "): " + e.what());
        }
        r.layer_outputs.push_back(std::move(out));
        cur = &r.layer_outputs.back();
    }
    if (r.layer_outputs.empty()) {
        r.layer_outputs.push_back(batch);
    }
    return r;
}

Tensor apply_readout_scale(const NetworkGraph& g, const Tensor& output) {
    if (g.readout_scale.empty()) return output;
    Tensor out = output;
    const int64_t batch = out.dim(0);
    const int64_t per = out.numel() / batch;
    for (int64_t n = 0; n < batch; ++n) {
        float* y = out.data() + n * per;
        for (int64_t i = 0; i < per; ++i) {
            const float s = g.readout_scale.size() == 1 ? g.readout_scale[0]
                                                        : g.readout_scale[static_cast<size_t>(i)];
            y[i] *= s;
        }
    }
    return out;
}

std::vector<int64_t> argmax_rows(const Tensor& output) {
    const int64_t batch = output.dim(0);
    const int64_t classes = output.numel() / batch;
    std::vector<int64_t> idx(static_cast<size_t>(batch));
    for (int64_t n = 0; n < batch; ++n) {
        const float* y = output.data() + n * classes;
        int64_t best = 0;
        for (int64_t c = 1; c < classes; ++c) {
            if (y[c] > y[best]) best = c;
        }
        idx[static_cast<size_t>(n)] = best;
    }
    return idx;
}

}  // namespace snnconv
