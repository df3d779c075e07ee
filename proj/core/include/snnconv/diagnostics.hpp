#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnconv/graph.hpp"
#include "snnconv/snn_sim.hpp"
#include "snnconv/tensor.hpp"

namespace snnconv {

/// Batch-mean 2-norm gap at one activation layer between the simulated
/// average postsynaptic potential at horizon T and the analog ReLU
/// activation. Both graphs must share weights and layer structure.
double conversion_error(const NetworkGraph& ann, const NetworkGraph& snn, const Tensor& batch,
                        int64_t timesteps, size_t layer_index);

struct SlotErrorRow {
    size_t slot = 0;         // ordinal over activation slots
    size_t layer_index = 0;  // graph layer index
    double epsilon = 0;      // intra-layer error, same average input to both sides
    double e_measured = 0;   // gap to the analog activation at this slot
    double coefficient = 0;  // weight of epsilon in the model bound
    double contribution = 0; // coefficient * epsilon
};

struct StageNormRow {
    size_t layer_index = 0;
    double norm = 0;           // norm used by the bound
    double reshaped_norm = 0;  // flattened-kernel norm, for reference
};

struct ErrorReport {
    std::vector<SlotErrorRow> slots;
    std::vector<StageNormRow> stage_norms;
    double bound = 0;    // upper bound on e_model
    double e_model = 0;  // measured output gap
    int64_t timesteps = 0;
    std::string norm_variant = "conv_operator";
};

/// Runs the spiking simulation and the analog reference on the same batch
/// and combines per-slot intra-layer errors with stage operator norms into
/// an upper bound on the output conversion error. Residual joins contribute
/// their tapped branch through an extra bound edge.
ErrorReport error_bound(const NetworkGraph& g, const Tensor& batch, int64_t timesteps);

std::vector<std::vector<std::string>> error_report_rows(const ErrorReport& report);

struct SopCount {
    uint64_t sops = 0;
    // Pre-neuron max pooling comparator work, charged per timestep and
    // reported separately from synaptic operations.
    uint64_t comparator_ops = 0;
};

/// Synaptic operations implied by a trace: every spike is charged once per
/// structural synapse it crosses (dense and conv fan-out at the spike's
/// position, one op per pooled copy, residual taps and membrane
/// accumulations as single ops).
SopCount count_sops(const SpikeTrace& trace, const NetworkGraph& g);

/// Analog cost of one forward pass: 2 FLOPs per multiply-accumulate plus
/// one add per bias application, over dense and conv layers.
uint64_t count_flops(const NetworkGraph& g);

struct EnergyReport {
    uint64_t sops = 0;
    uint64_t flops = 0;  // total over all frames
    uint64_t comparator_ops = 0;
    int64_t frames = 0;
    double snn_energy_joules = 0;
    double ann_energy_joules = 0;
    double snn_frames_per_joule = 0;
    double ann_frames_per_joule = 0;
};

inline constexpr double kJoulesPerSop = 77e-15;
inline constexpr double kJoulesPerFlop = 12.5e-12;

EnergyReport energy_report(uint64_t sops, uint64_t flops, int64_t frames,
                           uint64_t comparator_ops = 0);

std::vector<std::vector<std::string>> energy_report_rows(const EnergyReport& report);

}  // namespace snnconv
