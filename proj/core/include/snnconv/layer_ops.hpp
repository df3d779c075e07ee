#pragma once

#include "snnconv/graph.hpp"
#include "snnconv/tensor.hpp"

namespace snnconv {

// Single-layer kernels shared by the analog forward pass and the spiking
// simulator. Inputs carry a leading batch dimension. Accumulation order is
// fixed (batch, output position, reduction index) so results are
// reproducible run to run.

Tensor apply_dense(const DenseParams& p, const Tensor& in);
Tensor apply_conv2d(const Conv2dParams& p, const Tensor& in);
Tensor apply_maxpool(const Pool2dParams& p, const Tensor& in);
Tensor apply_avgpool(const Pool2dParams& p, const Tensor& in);
Tensor apply_batchnorm(const BatchNormParams& p, const Tensor& in);
Tensor apply_residual_add(const ResidualAddParams& p, const Tensor& in, const Tensor& source);
Tensor apply_flatten(const Tensor& in);

Tensor apply_relu(const Tensor& in);
Tensor apply_clip(const ActivationParams& slot, const Tensor& in);

}  // namespace snnconv
