#include "snnconv/balancer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "snnconv/errors.hpp"
#include "snnconv/layer_ops.hpp"
#include "snnconv/report.hpp"

namespace snnconv {

NetworkGraph clipify(const NetworkGraph& g) {
    if (g.activation_mode != ActivationMode::ReLU) {
        throw_data("clipify expects a relu-mode graph, got " +
                   std::string(to_string(g.activation_mode)));
    }
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (g.layers[i].kind == LayerKind::MaxPool) {
            throw_data("layer " + std::to_string(i) +
                       ": rewrite max pooling pre-neuron before clipify");
        }
    }
    NetworkGraph out = g;
    out.activation_mode = ActivationMode::Clip;
    for (auto& l : out.layers) {
        if (l.kind == LayerKind::Activation) l.as<ActivationParams>().theta = {0.0f};
    }
    validate_graph(out);
    return out;
}

double delta_theta(const float* zhat, int64_t n, double theta) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double z = zhat[i];
        if (z > theta) acc += 2.0 * (z - theta);
    }
    return -acc;
}

double delta_theta(const Tensor& zhat, double theta) {
    return delta_theta(zhat.data(), zhat.numel(), theta);
}

std::vector<double> delta_theta_channelwise(const Tensor& zhat,
                                            const std::vector<double>& theta) {
    if (zhat.rank() < 2) throw_data("channel-wise update expects a batched stream");
    const int64_t batch = zhat.dim(0);
    const int64_t channels = zhat.dim(1);
    if (static_cast<int64_t>(theta.size()) != channels) {
        throw_data("theta length " + std::to_string(theta.size()) +
                   " does not match channel count " + std::to_string(channels));
    }
    const int64_t plane = zhat.numel() / (batch * channels);
    std::vector<double> delta(theta.size(), 0.0);
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t c = 0; c < channels; ++c) {
            const float* z = zhat.data() + (n * channels + c) * plane;
            const double t = theta[static_cast<size_t>(c)];
            double acc = 0.0;
            for (int64_t i = 0; i < plane; ++i) {
                if (z[i] > t) acc += 2.0 * (static_cast<double>(z[i]) - t);
            }
            delta[static_cast<size_t>(c)] -= acc;
        }
    }
    return delta;
}

namespace {

struct SlotState {
    size_t layer_index;
    int64_t channel_count;
    int64_t plane;              // spatial positions per channel
    std::vector<double> theta;  // length 1 (layer-wise) or channel_count
};

void sync_theta(NetworkGraph& g, const std::vector<SlotState>& slots) {
    for (const auto& s : slots) {
        auto& p = g.layers[s.layer_index].as<ActivationParams>();
        p.theta.resize(s.theta.size());
        for (size_t i = 0; i < s.theta.size(); ++i) p.theta[i] = static_cast<float>(s.theta[i]);
    }
}

}  // namespace

BalanceResult balance(const NetworkGraph& g, const Tensor& calibration_data,
                      const BalanceConfig& cfg) {
    if (g.activation_mode != ActivationMode::Clip) {
        throw_data("balance expects a clip-mode graph; run clipify first");
    }
    if (cfg.eta <= 0) throw_usage("eta must be > 0");
    if (cfg.iterations < 1) throw_usage("iteration count must be >= 1");
    if (cfg.theta_floor <= 0) throw_usage("theta floor must be > 0");
    if (calibration_data.rank() < 1 || calibration_data.dim(0) < 1) {
        throw_data("balance needs a non-empty calibration dataset");
    }

    BalanceResult result;
    result.graph = g;
    validate_graph(result.graph);
    const auto shapes = infer_layer_shapes(result.graph);

    std::vector<SlotState> slots;
    for (size_t i = 0; i < result.graph.layers.size(); ++i) {
        if (result.graph.layers[i].kind != LayerKind::Activation) continue;
        auto& p = result.graph.layers[i].as<ActivationParams>();
        SlotState s;
        s.layer_index = i;
        s.channel_count = p.channel_count;
        s.plane = shape_numel(shapes[i]) / p.channel_count;
        const size_t want =
            cfg.granularity == Granularity::ChannelWise ? static_cast<size_t>(s.channel_count) : 1;
        if (p.theta.size() == want) {
            s.theta.assign(p.theta.begin(), p.theta.end());
        } else if (p.theta.size() == 1) {
            s.theta.assign(want, static_cast<double>(p.theta[0]));
        } else {
            throw_data("layer " + std::to_string(i) + ": theta length " +
                       std::to_string(p.theta.size()) + " does not fit the requested granularity");
        }
        slots.push_back(std::move(s));
    }
    sync_theta(result.graph, slots);

    Batcher batcher(calibration_data, cfg.batch_size, cfg.seed);

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const Tensor batch = batcher.next();
        // Stream the batch through the graph; every slot is updated right
        // after producing its output with the pre-update theta, so a step
        // in layer l reaches layer l+1 only on the next iteration.
        std::vector<Tensor> outputs;
        outputs.reserve(result.graph.layers.size());
        const Tensor* cur = &batch;
        size_t slot_ordinal = 0;
        for (size_t i = 0; i < result.graph.layers.size(); ++i) {
            LayerSpec& l = result.graph.layers[i];
            Tensor out;
            switch (l.kind) {
                case LayerKind::Dense: out = apply_dense(l.as<DenseParams>(), *cur); break;
                case LayerKind::Conv2d: out = apply_conv2d(l.as<Conv2dParams>(), *cur); break;
                case LayerKind::PreNeuronMaxPool: out = apply_maxpool(l.as<Pool2dParams>(), *cur); break;
                case LayerKind::AvgPool: out = apply_avgpool(l.as<Pool2dParams>(), *cur); break;
                case LayerKind::BatchNorm: out = apply_batchnorm(l.as<BatchNormParams>(), *cur); break;
                case LayerKind::ResidualAdd:
                    out = apply_residual_add(l.as<ResidualAddParams>(), *cur,
                                             outputs[static_cast<size_t>(l.as<ResidualAddParams>().source)]);
                    break;
                case LayerKind::Flatten: out = apply_flatten(*cur); break;
                case LayerKind::MaxPool:
                    throw_internal("max pooling survived clipify");
                case LayerKind::Activation: {
                    SlotState& s = slots[slot_ordinal];
                    out = apply_clip(l.as<ActivationParams>(), *cur);

                    const int64_t batch_n = cur->dim(0);
                    double max_abs = 0.0;
                    if (s.theta.size() == 1) {
                        double d = delta_theta(*cur, s.theta[0]);
                        if (cfg.normalize_by_count) d /= static_cast<double>(cur->numel());
                        s.theta[0] = std::max(0.0, s.theta[0] - cfg.eta * d);
                        max_abs = std::abs(d);
                    } else {
                        std::vector<double> d = delta_theta_channelwise(*cur, s.theta);
                        const double count = static_cast<double>(batch_n * s.plane);
                        for (size_t c = 0; c < d.size(); ++c) {
                            if (cfg.normalize_by_count) d[c] /= count;
                            s.theta[c] = std::max(0.0, s.theta[c] - cfg.eta * d[c]);
                            max_abs = std::max(max_abs, std::abs(d[c]));
                        }
                    }
                    auto& p = l.as<ActivationParams>();
                    p.theta.resize(s.theta.size());
                    for (size_t c = 0; c < s.theta.size(); ++c) {
                        p.theta[c] = static_cast<float>(s.theta[c]);
                    }

                    double mean = 0.0;
                    for (double t : s.theta) mean += t;
                    mean /= static_cast<double>(s.theta.size());
                    result.history.push_back(ConvergenceRow{iter, static_cast<int>(slot_ordinal),
                                                            i, mean, max_abs});
                    ++slot_ordinal;
                    break;
                }
            }
            outputs.push_back(std::move(out));
            cur = &outputs.back();
        }
    }

    for (auto& s : slots) {
        for (auto& t : s.theta) t = std::max(t, cfg.theta_floor);
    }
    sync_theta(result.graph, slots);
    validate_graph(result.graph);
    return result;
}

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& history) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw_data(path + ": cannot open for writing");
    f << "iteration,slot,layer,theta_mean,max_abs_delta\n";
    for (const auto& row : history) {
        f << row.iteration << "," << row.slot << "," << row.layer_index << ","
          << format_double(row.theta_mean) << "," << format_double(row.max_abs_delta) << "\n";
    }
    if (!f) throw_data(path + ": write failed");
}

}  // namespace snnconv
