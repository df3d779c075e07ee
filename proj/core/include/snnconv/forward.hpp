#pragma once

#include "snnconv/graph.hpp"
#include "snnconv/tensor.hpp"

namespace snnconv {

/// Per-layer results of one analog forward pass. The pre-activation feeding
/// an activation slot at layer i is `layer_outputs[i-1]` (or the input batch
/// for i == 0).
struct ForwardResult {
    std::vector<Tensor> layer_outputs;

    const Tensor& output() const { return layer_outputs.back(); }
    const Tensor& slot_input(size_t layer_index, const Tensor& batch) const {
        return layer_index == 0 ? batch : layer_outputs[layer_index - 1];
    }
};

/// Runs the graph in ReLU or Clip mode on a batch shaped
/// (batch, input_shape...). IF mode is rejected; use the simulator.
ForwardResult forward_ann(const NetworkGraph& g, const Tensor& batch);

/// Applies the recorded readout scale (identity when none was recorded).
Tensor apply_readout_scale(const NetworkGraph& g, const Tensor& output);

/// Top-1 class indices from a (batch, classes) output; ties resolve to the
/// lowest class index.
std::vector<int64_t> argmax_rows(const Tensor& output);

}  // namespace snnconv
