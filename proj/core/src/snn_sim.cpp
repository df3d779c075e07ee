#include "snnconv/snn_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "snnconv/dataset.hpp"
#include "snnconv/errors.hpp"
#include "snnconv/forward.hpp"
#include "snnconv/layer_ops.hpp"

namespace snnconv {

Tensor if_step(IFLayerState& state, const Tensor& input_current) {
    if (!state.v.same_shape(input_current)) {
        throw_data("IF step input shape " + shape_to_string(input_current.shape()) +
                   " does not match membrane shape " + shape_to_string(state.v.shape()));
    }
    const int64_t batch = state.v.dim(0);
    const int64_t channels = state.v.dim(1);
    const int64_t plane = state.v.numel() / (batch * channels);
    Tensor spikes(state.v.shape());
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t c = 0; c < channels; ++c) {
            const float theta = state.theta.size() == 1
                                    ? state.theta[0]
                                    : state.theta[static_cast<size_t>(c)];
            const int64_t base = (n * channels + c) * plane;
            float* v = state.v.data() + base;
            const float* in = input_current.data() + base;
            float* s = spikes.data() + base;
            uint32_t* counts = state.spike_counts.data() + base;
            for (int64_t i = 0; i < plane; ++i) {
                v[i] += in[i];
                if (v[i] >= theta) {
                    s[i] = 1.0f;
                    v[i] -= theta;
                    ++counts[i];
                } else {
                    s[i] = 0.0f;
                }
            }
        }
    }
    return spikes;
}

std::vector<IFLayerState> init_membrane(const NetworkGraph& g, int64_t batch) {
    NetworkGraph checked = g;
    validate_graph(checked);
    const auto shapes = infer_layer_shapes(checked);
    std::vector<IFLayerState> states;
    for (size_t i = 0; i < checked.layers.size(); ++i) {
        if (checked.layers[i].kind != LayerKind::Activation) continue;
        const auto& p = checked.layers[i].as<ActivationParams>();
        if (p.theta.empty()) throw_data("layer " + std::to_string(i) + ": no thresholds to simulate");
        for (float t : p.theta) {
            if (!(t > 0.0f)) {
                throw_data("layer " + std::to_string(i) +
                           ": non-positive threshold; finalize balancing first");
            }
        }
        IFLayerState st;
        st.layer_index = i;
        st.theta = p.theta;
        std::vector<int64_t> vshape = shapes[i];
        vshape.insert(vshape.begin(), batch);
        st.v = Tensor(vshape);
        const int64_t channels = vshape[1];
        const int64_t plane = st.v.numel() / (batch * channels);
        for (int64_t n = 0; n < batch; ++n) {
            for (int64_t c = 0; c < channels; ++c) {
                const float t = p.theta.size() == 1 ? p.theta[0] : p.theta[static_cast<size_t>(c)];
                float* v = st.v.data() + (n * channels + c) * plane;
                for (int64_t i2 = 0; i2 < plane; ++i2) v[i2] = 0.5f * t;
            }
        }
        st.spike_counts.assign(static_cast<size_t>(st.v.numel()), 0);
        states.push_back(std::move(st));
    }
    return states;
}

namespace {

// Spikes leave a slot scaled by its threshold (per channel).
Tensor scale_by_theta(const Tensor& spikes, const std::vector<float>& theta) {
    Tensor out = spikes;
    const int64_t batch = out.dim(0);
    const int64_t channels = out.dim(1);
    const int64_t plane = out.numel() / (batch * channels);
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t c = 0; c < channels; ++c) {
            const float t = theta.size() == 1 ? theta[0] : theta[static_cast<size_t>(c)];
            float* y = out.data() + (n * channels + c) * plane;
            for (int64_t i = 0; i < plane; ++i) y[i] *= t;
        }
    }
    return out;
}

struct SimInternals {
    SimResult result;
    std::vector<Tensor> slot_input_sum;   // per slot, summed input currents
    std::vector<Tensor> slot_output_sum;  // per slot, summed theta-scaled spikes
};

SimInternals run_sim(const NetworkGraph& g, const Tensor& batch, const SimConfig& cfg,
                     bool record_averages) {
    if (g.activation_mode == ActivationMode::ReLU) {
        throw_data("simulate requires a converted graph (clip or if mode)");
    }
    if (cfg.timesteps < 1) throw_usage("timestep count must be >= 1");
    if (cfg.delay < 0 || cfg.delay > cfg.timesteps - 1) {
        throw_usage("delay must satisfy 0 <= t0 <= T-1");
    }
    for (const auto& l : g.layers) {
        if (l.kind == LayerKind::MaxPool) {
            throw_data("max pooling must be rewritten pre-neuron before simulation");
        }
        if (l.kind == LayerKind::BatchNorm) {
            throw_data("batchnorm must be folded before simulation");
        }
    }

    const int64_t batch_n = batch.dim(0);
    std::vector<IFLayerState> states = init_membrane(g, batch_n);

    SimInternals sim;
    SpikeTrace& trace = sim.result.trace;
    trace.timesteps = cfg.timesteps;
    trace.samples = batch_n;
    const auto shapes = infer_layer_shapes(g);
    for (const auto& st : states) {
        SlotTrace t;
        t.layer_index = st.layer_index;
        t.shape = shapes[st.layer_index];
        t.spike_counts.assign(static_cast<size_t>(shape_numel(t.shape)), 0);
        t.per_step_totals.assign(static_cast<size_t>(cfg.timesteps), 0);
        t.theta = st.theta;
        if (cfg.record_trace) {
            t.input_current_sum.assign(static_cast<size_t>(st.v.numel()), 0.0);
        }
        trace.slots.push_back(std::move(t));
    }
    if (record_averages) {
        for (const auto& st : states) {
            sim.slot_input_sum.emplace_back(st.v.shape());
            sim.slot_output_sum.emplace_back(st.v.shape());
        }
    }

    Tensor out_accum;
    std::vector<Tensor> outputs(g.layers.size());
    for (int64_t t = 1; t <= cfg.timesteps; ++t) {
        const Tensor* cur = &batch;
        size_t slot = 0;
        for (size_t i = 0; i < g.layers.size(); ++i) {
            const LayerSpec& l = g.layers[i];
            Tensor out;
            switch (l.kind) {
                case LayerKind::Dense: out = apply_dense(l.as<DenseParams>(), *cur); break;
                case LayerKind::Conv2d: out = apply_conv2d(l.as<Conv2dParams>(), *cur); break;
                case LayerKind::PreNeuronMaxPool: out = apply_maxpool(l.as<Pool2dParams>(), *cur); break;
                case LayerKind::AvgPool: out = apply_avgpool(l.as<Pool2dParams>(), *cur); break;
                case LayerKind::ResidualAdd: {
                    const auto& p = l.as<ResidualAddParams>();
                    out = apply_residual_add(p, *cur, outputs[static_cast<size_t>(p.source)]);
                    break;
                }
                case LayerKind::Flatten: out = apply_flatten(*cur); break;
                case LayerKind::MaxPool:
                case LayerKind::BatchNorm:
                    throw_internal("unsupported layer survived simulation preflight");
                case LayerKind::Activation: {
                    IFLayerState& st = states[slot];
                    SlotTrace& tr = trace.slots[slot];
                    if (cfg.record_trace) {
                        for (int64_t e = 0; e < cur->numel(); ++e) {
                            tr.input_current_sum[static_cast<size_t>(e)] +=
                                static_cast<double>((*cur)[e]);
                        }
                    }
                    if (record_averages) {
                        Tensor& acc = sim.slot_input_sum[slot];
                        for (int64_t e = 0; e < cur->numel(); ++e) acc[e] += (*cur)[e];
                    }
                    Tensor spikes = if_step(st, *cur);
                    uint64_t fired = 0;
                    const int64_t per_sample = spikes.numel() / batch_n;
                    for (int64_t n = 0; n < batch_n; ++n) {
                        for (int64_t e = 0; e < per_sample; ++e) {
                            if (spikes[n * per_sample + e] != 0.0f) {
                                ++tr.spike_counts[static_cast<size_t>(e)];
                                ++fired;
                            }
                        }
                    }
                    tr.per_step_totals[static_cast<size_t>(t - 1)] = fired;
                    out = scale_by_theta(spikes, st.theta);
                    if (record_averages) {
                        Tensor& acc = sim.slot_output_sum[slot];
                        for (int64_t e = 0; e < out.numel(); ++e) acc[e] += out[e];
                    }
                    ++slot;
                    break;
                }
            }
            outputs[i] = std::move(out);
            cur = &outputs[i];
        }
        if (t > cfg.delay) {
            if (out_accum.numel() == 0) {
                out_accum = *cur;
            } else {
                for (int64_t e = 0; e < out_accum.numel(); ++e) out_accum[e] += (*cur)[e];
            }
        }
    }

    const float window = static_cast<float>(cfg.timesteps - cfg.delay);
    for (int64_t e = 0; e < out_accum.numel(); ++e) out_accum[e] /= window;
    sim.result.output = std::move(out_accum);

    if (cfg.record_trace) {
        for (size_t s = 0; s < states.size(); ++s) {
            trace.slots[s].per_unit_counts = states[s].spike_counts;
            trace.slots[s].v_final.assign(states[s].v.data(),
                                          states[s].v.data() + states[s].v.numel());
        }
    }
    return sim;
}

}  // namespace

SimResult simulate(const NetworkGraph& g, const Tensor& batch, const SimConfig& cfg) {
    return run_sim(g, batch, cfg, false).result;
}

SimAverages simulate_with_averages(const NetworkGraph& g, const Tensor& batch, int64_t timesteps) {
    SimConfig cfg;
    cfg.timesteps = timesteps;
    cfg.delay = 0;
    SimInternals sim = run_sim(g, batch, cfg, true);
    SimAverages avg;
    avg.output = std::move(sim.result.output);
    const float inv_t = 1.0f / static_cast<float>(timesteps);
    for (auto& t : sim.slot_input_sum) {
        for (int64_t e = 0; e < t.numel(); ++e) t[e] *= inv_t;
        avg.slot_input_avg.push_back(std::move(t));
    }
    for (auto& t : sim.slot_output_sum) {
        for (int64_t e = 0; e < t.numel(); ++e) t[e] *= inv_t;
        avg.slot_output_avg.push_back(std::move(t));
    }
    return avg;
}

DelayEstimate estimate_t0(const NetworkGraph& g, const Tensor& data, double init_fraction) {
    if (g.activation_mode == ActivationMode::ReLU) {
        throw_data("delay estimation requires a converted graph with thresholds");
    }
    if (data.rank() < 1 || data.dim(0) < 1) throw_data("delay estimation needs data");
    NetworkGraph clip_graph = g;
    clip_graph.activation_mode = ActivationMode::Clip;
    validate_graph(clip_graph);

    const auto slot_layers = activation_layer_indices(clip_graph);
    const auto shapes = infer_layer_shapes(clip_graph);
    std::vector<std::vector<double>> rect_sum(slot_layers.size());
    for (size_t s = 0; s < slot_layers.size(); ++s) {
        rect_sum[s].assign(static_cast<size_t>(shape_numel(shapes[slot_layers[s]])), 0.0);
    }

    const int64_t samples = data.dim(0);
    const int64_t chunk = 256;
    Batcher batcher(data, std::min(chunk, samples));
    const int64_t batches = batcher.batches_per_epoch();
    for (int64_t b = 0; b < batches; ++b) {
        const Tensor batch = batcher.next();
        const ForwardResult fr = forward_ann(clip_graph, batch);
        const int64_t bn = batch.dim(0);
        for (size_t s = 0; s < slot_layers.size(); ++s) {
            const Tensor& z = fr.slot_input(slot_layers[s], batch);
            const int64_t per = z.numel() / bn;
            for (int64_t n = 0; n < bn; ++n) {
                const float* zp = z.data() + n * per;
                for (int64_t e = 0; e < per; ++e) {
                    if (zp[e] > 0.0f) rect_sum[s][static_cast<size_t>(e)] += zp[e];
                }
            }
        }
    }

    constexpr double kEps = 1e-6;
    constexpr double kCap = 1e6;
    DelayEstimate est;
    for (size_t s = 0; s < slot_layers.size(); ++s) {
        const auto& p = clip_graph.layers[slot_layers[s]].as<ActivationParams>();
        double theta_max = 0.0;
        for (float t : p.theta) theta_max = std::max(theta_max, static_cast<double>(t));
        const double numerator = theta_max * (1.0 - init_fraction);

        double mean_max = 0.0;
        for (double v : rect_sum[s]) mean_max = std::max(mean_max, v / static_cast<double>(samples));

        double term;
        if (mean_max < kEps) {
            term = std::min(numerator / kEps, kCap);
            if (numerator > 0.0) est.floored_layers.push_back(s);
        } else {
            term = numerator / mean_max;
        }
        est.per_layer.push_back(term);
        est.value += term;
    }
    return est;
}

int64_t choose_delay(double t0_estimate, int64_t timesteps, int64_t window) {
    if (timesteps < 1) throw_usage("timestep count must be >= 1");
    if (window < 1) throw_usage("delay window must be >= 1");
    int64_t t0;
    if (static_cast<double>(timesteps) >= t0_estimate + static_cast<double>(window)) {
        t0 = static_cast<int64_t>(std::floor(t0_estimate));
    } else {
        t0 = timesteps - window;
    }
    return std::clamp<int64_t>(t0, 0, timesteps - 1);
}

}  // namespace snnconv
