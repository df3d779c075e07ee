#pragma once

#include <cstdint>
#include <vector>

#include "snnconv/graph.hpp"
#include "snnconv/tensor.hpp"

namespace snnconv {

struct SimConfig {
    int64_t timesteps = 64;  // T >= 1
    int64_t delay = 0;       // t0: output averaged over steps t0+1 .. T
    bool record_trace = false;
};

/// Membrane state of one spiking layer. `v` spans (batch, slot shape);
/// `theta` broadcasts per channel (length 1 or channel count).
struct IFLayerState {
    size_t layer_index = 0;
    Tensor v;
    std::vector<float> theta;
    std::vector<uint32_t> spike_counts;  // per (batch, neuron)
};

/// One integrate-and-fire step with reset by subtraction: v += input, fire
/// where v >= theta (equality fires), subtract theta where fired. Returns
/// the binary spike tensor and bumps the per-neuron spike counters.
Tensor if_step(IFLayerState& state, const Tensor& input_current);

/// Fresh membrane states for every activation slot, initialized to theta/2
/// with zeroed spike counters. Thresholds must be strictly positive.
std::vector<IFLayerState> init_membrane(const NetworkGraph& g, int64_t batch);

struct SlotTrace {
    size_t layer_index = 0;
    std::vector<int64_t> shape;                // per-neuron shape, batch excluded
    std::vector<uint64_t> spike_counts;        // per neuron, summed over the batch
    std::vector<uint64_t> per_step_totals;     // length T
    // Filled only when SimConfig::record_trace is set:
    std::vector<double> input_current_sum;     // per (batch, neuron), over all steps
    std::vector<uint32_t> per_unit_counts;     // per (batch, neuron)
    std::vector<float> v_final;                // per (batch, neuron)
    std::vector<float> theta;
};

struct SpikeTrace {
    std::vector<SlotTrace> slots;
    int64_t timesteps = 0;
    int64_t samples = 0;
};

struct SimResult {
    Tensor output;  // last-layer values averaged over steps t0+1 .. T
    SpikeTrace trace;
};

/// Time-stepped inference of a converted graph: the analog batch drives the
/// first layer at every step, spikes carry their slot's theta as amplitude,
/// and biases inject as constant per-step currents.
SimResult simulate(const NetworkGraph& g, const Tensor& batch, const SimConfig& cfg);

/// Like simulate with delay 0, additionally reporting each slot's
/// time-averaged input current and output potential at horizon T.
struct SimAverages {
    Tensor output;
    std::vector<Tensor> slot_input_avg;
    std::vector<Tensor> slot_output_avg;
};
SimAverages simulate_with_averages(const NetworkGraph& g, const Tensor& batch, int64_t timesteps);

struct DelayEstimate {
    double value = 0.0;
    std::vector<double> per_layer;        // one entry per activation slot
    std::vector<size_t> floored_layers;   // slots whose mean activation was ~0
};

/// Expected arrival step of the first output spike: per slot,
/// (theta - v0) / max over neurons of the dataset-mean rectified
/// pre-activation, summed over slots. Per-channel thetas reduce by max.
/// Dead layers get an epsilon denominator and a capped, flagged term.
DelayEstimate estimate_t0(const NetworkGraph& g, const Tensor& data,
                          double init_fraction = 0.5);

/// Delay step for an evaluation at horizon T: floor(t0_estimate) when the
/// run is long enough to average afterwards, otherwise T - window; clamped
/// to [0, T-1].
int64_t choose_delay(double t0_estimate, int64_t timesteps, int64_t window = 4);

}  // namespace snnconv
