#pragma once

#include "snnconv/graph.hpp"

namespace snnconv {

/// Removes every BatchNorm layer by rescaling the weights and bias of the
/// linear layer immediately before it. Residual source indices are remapped
/// to the surviving layers. Errors if a BatchNorm is not directly preceded
/// by a Dense or Conv2d layer.
NetworkGraph fold_batchnorm(const NetworkGraph& g);

/// Rewrites every (Activation, MaxPool) pair into
/// (PreNeuronMaxPool, Activation). With ReLU activations the network output
/// is unchanged: per pooling window, max(relu(z)) == relu(max(z)) for all z.
/// No-op when the graph has no max pooling. Requires ReLU mode.
NetworkGraph rewrite_preneuron_maxpool(const NetworkGraph& g);

}  // namespace snnconv
