#include "snnconv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "snnconv/errors.hpp"
#include "snnconv/forward.hpp"
#include "snnconv/layer_ops.hpp"
#include "snnconv/report.hpp"
#include "snnconv/spectral_norm.hpp"

namespace snnconv {

namespace {

// Batch-mean of per-sample 2-norms of (a - b).
double batch_mean_l2(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw_internal("norm of differently shaped tensors");
    const int64_t batch = a.dim(0);
    const int64_t per = a.numel() / batch;
    double total = 0;
    for (int64_t n = 0; n < batch; ++n) {
        double acc = 0;
        for (int64_t e = 0; e < per; ++e) {
            const double d = static_cast<double>(a[n * per + e]) - b[n * per + e];
            acc += d * d;
        }
        total += std::sqrt(acc);
    }
    return total / static_cast<double>(batch);
}

// Reconstructs the analog value each slot would see if its parents emitted
// their time-averaged outputs: linear stages applied once, slot outputs
// replaced by the measured averages.
std::vector<Tensor> static_slot_inputs(const NetworkGraph& g, const Tensor& batch,
                                       const SimAverages& avg) {
    std::vector<Tensor> slot_inputs;
    std::vector<Tensor> outputs(g.layers.size());
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
                throw_data("fold batchnorm and rewrite max pooling before diagnostics");
            case LayerKind::Activation:
                slot_inputs.push_back(*cur);
                out = avg.slot_output_avg[slot];
                ++slot;
                break;
        }
        outputs[i] = std::move(out);
        cur = &outputs[i];
    }
    return slot_inputs;
}

struct StageCoeff {
    double value = 1.0;
    bool is_weighted = false;  // dense/conv, reported in the norms table
    double reshaped = 0.0;
};

StageCoeff stage_coefficient(const LayerSpec& l, const std::vector<int64_t>& in_shape) {
    StageCoeff c;
    switch (l.kind) {
        case LayerKind::Dense: {
            c.value = reshaped_kernel_norm(l);
            c.reshaped = c.value;
            c.is_weighted = true;
            break;
        }
        case LayerKind::Conv2d: {
            c.value = conv_operator_norm(l.as<Conv2dParams>(), in_shape[1], in_shape[2]);
            c.reshaped = reshaped_kernel_norm(l);
            c.is_weighted = true;
            break;
        }
        case LayerKind::PreNeuronMaxPool:
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: {
            const auto& p = l.as<Pool2dParams>();
            // Worst-case window overlap of one input position.
            const double oy = std::ceil(static_cast<double>(p.kernel_h) / p.stride_h);
            const double ox = std::ceil(static_cast<double>(p.kernel_w) / p.stride_w);
            const double overlap = oy * ox;
            if (l.kind == LayerKind::AvgPool) {
                c.value = std::sqrt(overlap / static_cast<double>(p.kernel_h * p.kernel_w));
            } else {
                c.value = std::sqrt(overlap);
            }
            break;
        }
        case LayerKind::BatchNorm: {
            const auto& p = l.as<BatchNormParams>();
            double m = 0;
            for (int64_t ch = 0; ch < p.channels; ++ch) {
                m = std::max(m, std::abs(static_cast<double>(p.gamma[ch])) /
                                    std::sqrt(static_cast<double>(p.running_var[ch]) + p.eps));
            }
            c.value = m;
            break;
        }
        case LayerKind::Flatten:
        case LayerKind::ResidualAdd:
        case LayerKind::Activation:
            break;
    }
    return c;
}

double tap_coefficient(const ResidualAddParams& p) {
    if (p.scale.empty()) return 1.0;
    double m = 0;
    for (float s : p.scale) m = std::max(m, std::abs(static_cast<double>(s)));
    return m;
}

}  // namespace

double conversion_error(const NetworkGraph& ann, const NetworkGraph& snn, const Tensor& batch,
                        int64_t timesteps, size_t layer_index) {
    if (timesteps < 1) throw_usage("timestep count must be >= 1");
    if (layer_index >= snn.layers.size() ||
        snn.layers[layer_index].kind != LayerKind::Activation) {
        throw_data("layer " + std::to_string(layer_index) + " is not an activation slot");
    }
    NetworkGraph relu = ann;
    relu.activation_mode = ActivationMode::ReLU;
    const ForwardResult fr = forward_ann(relu, batch);

    const SimAverages avg = simulate_with_averages(snn, batch, timesteps);
    const auto slots = activation_layer_indices(snn);
    size_t ordinal = slots.size();
    for (size_t s = 0; s < slots.size(); ++s) {
        if (slots[s] == layer_index) ordinal = s;
    }
    if (ordinal == slots.size()) throw_internal("activation slot lookup failed");
    return batch_mean_l2(avg.slot_output_avg[ordinal], fr.layer_outputs[layer_index]);
}

ErrorReport error_bound(const NetworkGraph& g, const Tensor& batch, int64_t timesteps) {
    ErrorReport report;
    report.timesteps = timesteps;

    NetworkGraph relu = g;
    relu.activation_mode = ActivationMode::ReLU;
    const ForwardResult ann = forward_ann(relu, batch);
    const SimAverages avg = simulate_with_averages(g, batch, timesteps);
    const std::vector<Tensor> zhat = static_slot_inputs(g, batch, avg);
    const auto shapes = infer_layer_shapes(g);
    const auto slot_layers = activation_layer_indices(g);
    const size_t n_slots = slot_layers.size();

    // Per-slot intra-layer and measured errors.
    std::vector<double> eps(n_slots), e_meas(n_slots);
    for (size_t s = 0; s < n_slots; ++s) {
        eps[s] = batch_mean_l2(avg.slot_output_avg[s], apply_relu(zhat[s]));
        e_meas[s] = batch_mean_l2(avg.slot_output_avg[s], ann.layer_outputs[slot_layers[s]]);
    }

    // Bound recursion over the slot DAG. Deviations at any stream point
    // decompose into per-slot coefficients;每 slot bound is linear in the
    // epsilons, so coefficients are carried symbolically.
    std::vector<std::vector<double>> slot_bound_coeffs(n_slots);
    std::map<size_t, double> contribs;  // slot ordinal -> coefficient at the current point
    std::vector<std::map<size_t, double>> point_contribs(g.layers.size());
    std::map<size_t, size_t> ordinal_of_layer;
    for (size_t s = 0; s < n_slots; ++s) ordinal_of_layer[slot_layers[s]] = s;

    size_t slot = 0;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        const std::vector<int64_t>& in_shape = i == 0 ? g.input_shape : shapes[i - 1];
        if (l.kind == LayerKind::Activation) {
            std::vector<double> coeffs(n_slots, 0.0);
            for (const auto& [p, c] : contribs) {
                for (size_t k = 0; k < n_slots; ++k) coeffs[k] += c * slot_bound_coeffs[p][k];
            }
            coeffs[slot] += 1.0;  // this slot's own intra-layer term
            slot_bound_coeffs[slot] = std::move(coeffs);
            contribs.clear();
            contribs[slot] = 1.0;
            ++slot;
        } else if (l.kind == LayerKind::ResidualAdd) {
            const auto& p = l.as<ResidualAddParams>();
            const double tap = tap_coefficient(p);
            const auto& src_contribs = point_contribs[static_cast<size_t>(p.source)];
            for (const auto& [s, c] : src_contribs) contribs[s] += tap * c;
        } else {
            const StageCoeff c = stage_coefficient(l, in_shape);
            if (c.is_weighted) {
                report.stage_norms.push_back(StageNormRow{i, c.value, c.reshaped});
            }
            for (auto& [s, v] : contribs) v *= c.value;
        }
        point_contribs[i] = contribs;
    }

    std::vector<double> final_coeffs(n_slots, 0.0);
    for (const auto& [p, c] : contribs) {
        for (size_t k = 0; k < n_slots; ++k) final_coeffs[k] += c * slot_bound_coeffs[p][k];
    }

    report.bound = 0;
    for (size_t s = 0; s < n_slots; ++s) {
        SlotErrorRow row;
        row.slot = s;
        row.layer_index = slot_layers[s];
        row.epsilon = eps[s];
        row.e_measured = e_meas[s];
        row.coefficient = final_coeffs[s];
        row.contribution = final_coeffs[s] * eps[s];
        report.bound += row.contribution;
        report.slots.push_back(row);
    }
    report.e_model = batch_mean_l2(avg.output, ann.output());
    return report;
}

std::vector<std::vector<std::string>> error_report_rows(const ErrorReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"slot", "layer", "epsilon", "e_measured", "coefficient", "contribution"});
    for (const auto& r : report.slots) {
        rows.push_back({std::to_string(r.slot), std::to_string(r.layer_index),
                        format_double(r.epsilon), format_double(r.e_measured),
                        format_double(r.coefficient), format_double(r.contribution)});
    }
    rows.push_back({"bound", "", format_double(report.bound), "", "", ""});
    rows.push_back({"e_model", "", format_double(report.e_model), "", "", ""});
    return rows;
}

namespace {

class FanoutWalker {
public:
    FanoutWalker(const NetworkGraph& g, const std::vector<std::vector<int64_t>>& shapes)
        : g_(g), shapes_(shapes) {}

    // Synapse operations triggered by one spike event leaving the output of
    // layer `point` at flat position `pos`.
    uint64_t ops_from(size_t point, int64_t pos) const {
        uint64_t total = 0;
        for (size_t j = 0; j < g_.layers.size(); ++j) {
            if (g_.layers[j].kind != LayerKind::ResidualAdd) continue;
            if (g_.layers[j].as<ResidualAddParams>().source == static_cast<int64_t>(point)) {
                total += 1;  // scaled accumulate into the join
            }
        }
        const size_t j = point + 1;
        if (j >= g_.layers.size()) return total;
        const LayerSpec& l = g_.layers[j];
        const auto& shape = shapes_[point];
        switch (l.kind) {
            case LayerKind::Dense:
                return total + static_cast<uint64_t>(l.as<DenseParams>().out_features);
            case LayerKind::Conv2d: {
                const auto& p = l.as<Conv2dParams>();
                const int64_t ih = shape[1], iw = shape[2];
                const int64_t oh = (ih + 2 * p.pad_h - p.kernel_h) / p.stride_h + 1;
                const int64_t ow = (iw + 2 * p.pad_w - p.kernel_w) / p.stride_w + 1;
                const int64_t y = (pos / iw) % ih;
                const int64_t x = pos % iw;
                int64_t rows = 0, cols = 0;
                for (int64_t ky = 0; ky < p.kernel_h; ++ky) {
                    const int64_t num = y + p.pad_h - ky;
                    if (num < 0 || num % p.stride_h) continue;
                    const int64_t oy = num / p.stride_h;
                    if (oy >= 0 && oy < oh) ++rows;
                }
                for (int64_t kx = 0; kx < p.kernel_w; ++kx) {
                    const int64_t num = x + p.pad_w - kx;
                    if (num < 0 || num % p.stride_w) continue;
                    const int64_t ox = num / p.stride_w;
                    if (ox >= 0 && ox < ow) ++cols;
                }
                return total + static_cast<uint64_t>(rows * cols * p.out_channels);
            }
            case LayerKind::AvgPool: {
                const auto& p = l.as<Pool2dParams>();
                const int64_t ih = shape[1], iw = shape[2];
                const int64_t oh = (ih - p.kernel_h) / p.stride_h + 1;
                const int64_t ow = (iw - p.kernel_w) / p.stride_w + 1;
                const int64_t c = pos / (ih * iw);
                const int64_t y = (pos / iw) % ih;
                const int64_t x = pos % iw;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    if (y < oy * p.stride_h || y >= oy * p.stride_h + p.kernel_h) continue;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        if (x < ox * p.stride_w || x >= ox * p.stride_w + p.kernel_w) continue;
                        // One scaled copy into the pooled position, then
                        // onward as a (scaled) event.
                        total += 1 + ops_from(j, (c * oh + oy) * ow + ox);
                    }
                }
                return total;
            }
            case LayerKind::PreNeuronMaxPool:
                // Charged per timestep in the comparator column.
                return total;
            case LayerKind::Flatten:
                return total + ops_from(j, pos);
            case LayerKind::ResidualAdd:
            case LayerKind::Activation:
                return total + 1;  // join or membrane accumulate
            case LayerKind::MaxPool:
            case LayerKind::BatchNorm:
                throw_data("trace/graph mismatch: unprepared layer after an activation");
        }
        return total;
    }

private:
    const NetworkGraph& g_;
    const std::vector<std::vector<int64_t>>& shapes_;
};

}  // namespace

SopCount count_sops(const SpikeTrace& trace, const NetworkGraph& g) {
    const auto slot_layers = activation_layer_indices(g);
    if (slot_layers.size() != trace.slots.size()) {
        throw_data("trace has " + std::to_string(trace.slots.size()) + " slots but graph has " +
                   std::to_string(slot_layers.size()));
    }
    const auto shapes = infer_layer_shapes(g);
    FanoutWalker walker(g, shapes);

    SopCount count;
    for (size_t s = 0; s < trace.slots.size(); ++s) {
        const SlotTrace& tr = trace.slots[s];
        if (tr.layer_index != slot_layers[s] || tr.shape != shapes[slot_layers[s]]) {
            throw_data("trace slot " + std::to_string(s) + " does not match the graph");
        }
        for (int64_t pos = 0; pos < static_cast<int64_t>(tr.spike_counts.size()); ++pos) {
            const uint64_t n = tr.spike_counts[static_cast<size_t>(pos)];
            if (n == 0) continue;
            count.sops += n * walker.ops_from(slot_layers[s], pos);
        }
    }

    // Comparator work: every pre-neuron max pooling window is evaluated on
    // analog currents once per timestep per sample.
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (g.layers[i].kind != LayerKind::PreNeuronMaxPool) continue;
        const auto& p = g.layers[i].as<Pool2dParams>();
        const uint64_t windows = static_cast<uint64_t>(shape_numel(shapes[i]));
        count.comparator_ops += windows * static_cast<uint64_t>(p.kernel_h * p.kernel_w) *
                                static_cast<uint64_t>(trace.timesteps) *
                                static_cast<uint64_t>(trace.samples);
    }
    return count;
}

uint64_t count_flops(const NetworkGraph& g) {
    const auto shapes = infer_layer_shapes(g);
    uint64_t flops = 0;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        if (l.kind == LayerKind::Dense) {
            const auto& p = l.as<DenseParams>();
            flops += static_cast<uint64_t>(2 * p.in_features * p.out_features + p.out_features);
        } else if (l.kind == LayerKind::Conv2d) {
            const auto& p = l.as<Conv2dParams>();
            const uint64_t out_positions = static_cast<uint64_t>(shapes[i][1] * shapes[i][2]);
            const uint64_t macs = static_cast<uint64_t>(p.in_channels * p.kernel_h * p.kernel_w) *
                                  static_cast<uint64_t>(p.out_channels) * out_positions;
            flops += 2 * macs + static_cast<uint64_t>(p.out_channels) * out_positions;
        }
    }
    return flops;
}

EnergyReport energy_report(uint64_t sops, uint64_t flops, int64_t frames,
                           uint64_t comparator_ops) {
    if (frames < 1) throw_usage("frame count must be >= 1");
    EnergyReport r;
    r.sops = sops;
    r.flops = flops;
    r.comparator_ops = comparator_ops;
    r.frames = frames;
    r.snn_energy_joules = static_cast<double>(sops) * kJoulesPerSop;
    r.ann_energy_joules = static_cast<double>(flops) * kJoulesPerFlop;
    r.snn_frames_per_joule = r.snn_energy_joules > 0
                                 ? static_cast<double>(frames) / r.snn_energy_joules
                                 : std::numeric_limits<double>::infinity();
    r.ann_frames_per_joule = r.ann_energy_joules > 0
                                 ? static_cast<double>(frames) / r.ann_energy_joules
                                 : std::numeric_limits<double>::infinity();
    return r;
}

std::vector<std::vector<std::string>> energy_report_rows(const EnergyReport& r) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"metric", "value"});
    rows.push_back({"frames", std::to_string(r.frames)});
    rows.push_back({"sops", std::to_string(r.sops)});
    rows.push_back({"comparator_ops", std::to_string(r.comparator_ops)});
    rows.push_back({"flops", std::to_string(r.flops)});
    rows.push_back({"snn_energy_joules", format_double(r.snn_energy_joules)});
    rows.push_back({"ann_energy_joules", format_double(r.ann_energy_joules)});
    rows.push_back({"snn_frames_per_joule", format_double(r.snn_frames_per_joule)});
    rows.push_back({"ann_frames_per_joule", format_double(r.ann_frames_per_joule)});
    return rows;
}

}  // namespace snnconv
