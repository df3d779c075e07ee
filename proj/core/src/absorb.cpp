#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "snnconv/balancer.hpp"
#include "snnconv/errors.hpp"

namespace snnconv {

namespace {

// Walk state is always a per-channel factor vector for the current stream
// point (per-feature on flat streams).
using Scale = std::vector<float>;

Scale broadcast(const std::vector<float>& v, int64_t channels) {
    Scale s(static_cast<size_t>(channels));
    for (int64_t c = 0; c < channels; ++c) {
        s[static_cast<size_t>(c)] = v.size() == 1 ? v[0] : v[static_cast<size_t>(c)];
    }
    return s;
}

bool all_one(const Scale& s) {
    for (float v : s) {
        if (v != 1.0f) return false;
    }
    return true;
}

class Absorber {
public:
    Absorber(NetworkGraph& g, double theta_floor)
        : g_(g), floor_(theta_floor), shapes_(infer_layer_shapes(g)) {}

    void run() {
        for (size_t i = 0; i < g_.layers.size(); ++i) {
            if (g_.layers[i].kind != LayerKind::Activation) continue;
            auto& slot = g_.layers[i].as<ActivationParams>();
            Scale theta = broadcast(slot.theta, slot.channel_count);
            for (float t : theta) {
                if (static_cast<double>(t) < floor_) {
                    throw_data("layer " + std::to_string(i) + ": threshold " +
                               std::to_string(t) + " below floor; cannot absorb");
                }
            }
            if (all_one(theta)) continue;

            Scale inv(theta.size());
            for (size_t c = 0; c < theta.size(); ++c) inv[c] = 1.0f / theta[c];
            rescale_output(static_cast<int64_t>(i) - 1, inv);
            slot.theta.assign(slot.theta.size(), 1.0f);
            restore_consumers(i, theta);
        }
    }

private:
    int64_t channels_at(int64_t p) const {
        return p < 0 ? g_.input_shape[0] : shapes_[static_cast<size_t>(p)][0];
    }

    // Residual branches tapping stream point p pick up any rescale of that
    // point; fold the correction into their per-channel scale.
    void adjust_taps(int64_t p, const Scale& factor) {
        for (auto& l : g_.layers) {
            if (l.kind != LayerKind::ResidualAdd) continue;
            auto& r = l.as<ResidualAddParams>();
            if (r.source != p) continue;
            if (r.scale.empty()) r.scale.assign(factor.size(), 1.0f);
            if (r.scale.size() == 1 && factor.size() > 1) {
                r.scale.assign(factor.size(), r.scale[0]);
            }
            for (size_t c = 0; c < r.scale.size(); ++c) r.scale[c] *= factor[c];
        }
    }

    // Multiplies the output of layer j by per-channel s, keeping every other
    // consumer of j unchanged.
    void rescale_output(int64_t j, const Scale& s) {
        if (j < 0) {
            throw_data("activation draws directly from the network input; cannot absorb");
        }
        Scale undo(s.size());
        for (size_t c = 0; c < s.size(); ++c) undo[c] = 1.0f / s[c];
        adjust_taps(j, undo);

        LayerSpec& l = g_.layers[static_cast<size_t>(j)];
        switch (l.kind) {
            case LayerKind::Dense: {
                auto& p = l.as<DenseParams>();
                for (int64_t o = 0; o < p.out_features; ++o) {
                    float* row = p.weight.data() + o * p.in_features;
                    const float f = s[static_cast<size_t>(o)];
                    for (int64_t i = 0; i < p.in_features; ++i) row[i] *= f;
                    p.bias[o] *= f;
                }
                return;
            }
            case LayerKind::Conv2d: {
                auto& p = l.as<Conv2dParams>();
                const int64_t per_out = p.in_channels * p.kernel_h * p.kernel_w;
                for (int64_t o = 0; o < p.out_channels; ++o) {
                    float* k = p.weight.data() + o * per_out;
                    const float f = s[static_cast<size_t>(o)];
                    for (int64_t i = 0; i < per_out; ++i) k[i] *= f;
                    p.bias[o] *= f;
                }
                return;
            }
            case LayerKind::BatchNorm: {
                auto& p = l.as<BatchNormParams>();
                for (int64_t c = 0; c < p.channels; ++c) {
                    p.gamma[c] *= s[static_cast<size_t>(c)];
                    p.beta[c] *= s[static_cast<size_t>(c)];
                }
                return;
            }
            case LayerKind::AvgPool:
            case LayerKind::MaxPool:
            case LayerKind::PreNeuronMaxPool:
                // Positive per-channel factors commute with pooling.
                rescale_output(j - 1, s);
                return;
            case LayerKind::Flatten: {
                // Per-feature factors must be uniform inside each channel to
                // push through to the producer.
                const int64_t c_in = channels_at(j - 1);
                const int64_t plane = static_cast<int64_t>(s.size()) / c_in;
                Scale per_channel(static_cast<size_t>(c_in));
                for (int64_t c = 0; c < c_in; ++c) {
                    const float f = s[static_cast<size_t>(c * plane)];
                    for (int64_t i = 1; i < plane; ++i) {
                        if (s[static_cast<size_t>(c * plane + i)] != f) {
                            throw_data("flatten feeds an activation with factors varying inside "
                                       "a channel; cannot absorb");
                        }
                    }
                    per_channel[static_cast<size_t>(c)] = f;
                }
                rescale_output(j - 1, per_channel);
                return;
            }
            case LayerKind::ResidualAdd: {
                auto& p = l.as<ResidualAddParams>();
                if (p.scale.empty()) p.scale.assign(s.size(), 1.0f);
                if (p.scale.size() == 1 && s.size() > 1) p.scale.assign(s.size(), p.scale[0]);
                for (size_t c = 0; c < p.scale.size(); ++c) p.scale[c] *= s[c];
                rescale_output(j - 1, s);
                return;
            }
            case LayerKind::Activation:
                throw_data("layer " + std::to_string(j) +
                           ": activation feeds another activation; cannot absorb");
        }
    }

    // After slot i's thresholds became 1, its output is 1/theta of the
    // original. Push the restoring factor forward until a weighted layer
    // absorbs it, or record it as readout scale at the network output.
    void restore_consumers(size_t slot, Scale m) {
        int64_t p = static_cast<int64_t>(slot);
        adjust_taps(p, m);
        for (size_t j = slot + 1; j < g_.layers.size(); ++j) {
            LayerSpec& l = g_.layers[j];
            switch (l.kind) {
                case LayerKind::Dense: {
                    auto& d = l.as<DenseParams>();
                    for (int64_t o = 0; o < d.out_features; ++o) {
                        float* row = d.weight.data() + o * d.in_features;
                        for (int64_t i = 0; i < d.in_features; ++i) {
                            row[i] *= m[static_cast<size_t>(i)];
                        }
                    }
                    return;
                }
                case LayerKind::Conv2d: {
                    auto& c = l.as<Conv2dParams>();
                    const int64_t kk = c.kernel_h * c.kernel_w;
                    for (int64_t o = 0; o < c.out_channels; ++o) {
                        for (int64_t ic = 0; ic < c.in_channels; ++ic) {
                            float* k = c.weight.data() + (o * c.in_channels + ic) * kk;
                            for (int64_t i = 0; i < kk; ++i) k[i] *= m[static_cast<size_t>(ic)];
                        }
                    }
                    return;
                }
                case LayerKind::BatchNorm: {
                    auto& b = l.as<BatchNormParams>();
                    for (int64_t c = 0; c < b.channels; ++c) {
                        b.gamma[c] *= m[static_cast<size_t>(c)];
                        b.running_mean[c] /= m[static_cast<size_t>(c)];
                    }
                    return;
                }
                case LayerKind::AvgPool:
                case LayerKind::MaxPool:
                case LayerKind::PreNeuronMaxPool:
                    p = static_cast<int64_t>(j);
                    adjust_taps(p, m);
                    break;
                case LayerKind::Flatten: {
                    const int64_t plane = shape_numel(shapes_[j]) / static_cast<int64_t>(m.size());
                    Scale per_feature(static_cast<size_t>(shape_numel(shapes_[j])));
                    for (size_t c = 0; c < m.size(); ++c) {
                        for (int64_t i = 0; i < plane; ++i) {
                            per_feature[c * static_cast<size_t>(plane) + static_cast<size_t>(i)] = m[c];
                        }
                    }
                    m = std::move(per_feature);
                    p = static_cast<int64_t>(j);
                    adjust_taps(p, m);
                    break;
                }
                case LayerKind::ResidualAdd: {
                    // The deficit rides through the join; rescale the tapped
                    // branch down so both branches stay consistent.
                    auto& r = l.as<ResidualAddParams>();
                    if (r.scale.empty()) r.scale.assign(m.size(), 1.0f);
                    if (r.scale.size() == 1 && m.size() > 1) r.scale.assign(m.size(), r.scale[0]);
                    for (size_t c = 0; c < r.scale.size(); ++c) r.scale[c] /= m[c];
                    p = static_cast<int64_t>(j);
                    adjust_taps(p, m);
                    break;
                }
                case LayerKind::Activation:
                    throw_data("layer " + std::to_string(j) +
                               ": activation consumes another activation; cannot absorb");
            }
        }
        // Ran off the end: record the factor so tools can restore original
        // output magnitudes.
        Scale per_element = m;
        if (shapes_.empty()) return;
        const auto& out_shape = shapes_.back();
        const int64_t out_elems = shape_numel(out_shape);
        if (static_cast<int64_t>(m.size()) != out_elems) {
            const int64_t plane = out_elems / static_cast<int64_t>(m.size());
            per_element.assign(static_cast<size_t>(out_elems), 1.0f);
            for (size_t c = 0; c < m.size(); ++c) {
                for (int64_t i = 0; i < plane; ++i) {
                    per_element[c * static_cast<size_t>(plane) + static_cast<size_t>(i)] = m[c];
                }
            }
        }
        if (g_.readout_scale.empty()) {
            g_.readout_scale = per_element;
        } else {
            Scale existing = broadcast(g_.readout_scale, out_elems);
            for (size_t i = 0; i < existing.size(); ++i) existing[i] *= per_element[i];
            g_.readout_scale = std::move(existing);
        }
    }

    NetworkGraph& g_;
    double floor_;
    std::vector<std::vector<int64_t>> shapes_;
};

}  // namespace

NetworkGraph absorb_thresholds(const NetworkGraph& g, double theta_floor) {
    if (g.activation_mode == ActivationMode::ReLU) {
        throw_data("absorb_thresholds requires a clip- or if-mode graph with finalized thresholds");
    }
    NetworkGraph out = g;
    validate_graph(out);
    Absorber(out, theta_floor).run();
    validate_graph(out);
    return out;
}

}  // namespace snnconv
