#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnconv/dataset.hpp"
#include "snnconv/graph.hpp"

namespace snnconv {

enum class Granularity { LayerWise, ChannelWise };

struct BalanceConfig {
    double eta = 0.1;               // learning rate, > 0
    int iterations = 1000;          // K, >= 1
    Granularity granularity = Granularity::ChannelWise;
    int64_t batch_size = 32;
    uint64_t seed = 0;
    // Divide each step by the number of summed elements so one eta works
    // across layer sizes and batch sizes. Off reproduces the raw summed
    // update.
    bool normalize_by_count = true;
    double theta_floor = 1e-6;      // lower bound applied at finalize
};

struct ConvergenceRow {
    int iteration;          // 1-based
    int slot;               // ordinal over activation slots
    size_t layer_index;
    double theta_mean;      // mean over the slot's theta vector
    double max_abs_delta;   // max |delta theta| over channels this iteration
};

struct BalanceResult {
    NetworkGraph graph;
    std::vector<ConvergenceRow> history;
};

/// Switches a ReLU graph (max pooling already pre-neuron) to Clip mode with
/// every threshold initialized to zero.
NetworkGraph clipify(const NetworkGraph& g);

/// Threshold step for one slot treated layer-wise:
///   -sum_i 2*(z_i - theta) * H(z_i - theta), with H(0) = 0.
/// Never positive.
double delta_theta(const float* zhat, int64_t n, double theta);
double delta_theta(const Tensor& zhat, double theta);

/// Per-channel thresholds: channel c sums over all batch and spatial
/// positions of channel c. For flat streams every feature is its own
/// channel.
std::vector<double> delta_theta_channelwise(const Tensor& zhat, const std::vector<double>& theta);

/// Runs K iterations of local threshold updates on a Clip-mode graph. Each
/// iteration draws a batch, streams it forward, and updates every slot in
/// forward order after computing that slot's output with its pre-update
/// theta. Thresholds below the floor are raised to it at the end.
BalanceResult balance(const NetworkGraph& g, const Tensor& calibration_data,
                      const BalanceConfig& cfg);

/// Rescales weights so every threshold becomes exactly 1 while the network
/// function is preserved. A trailing activation with no consuming layer has
/// its scale recorded in `readout_scale`.
NetworkGraph absorb_thresholds(const NetworkGraph& g, double theta_floor = 1e-6);

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& history);

}  // namespace snnconv
