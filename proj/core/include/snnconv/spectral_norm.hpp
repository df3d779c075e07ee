#pragma once

#include <cstdint>

#include "snnconv/graph.hpp"
#include "snnconv/tensor.hpp"

namespace snnconv {

/// Largest singular value of a rows x cols row-major matrix, computed by
/// power iteration on mᵀm. Converges to a relative tolerance or stops after
/// max_iters. A zero matrix yields 0.
double spectral_norm(const float* m, int64_t rows, int64_t cols, int max_iters = 500,
                     double tol = 1e-12);

/// Spectral norm of a layer's weights flattened to 2-D: dense weights as-is,
/// conv kernels reshaped to out_channels x (in_channels*kh*kw).
double reshaped_kernel_norm(const LayerSpec& layer, int max_iters = 500, double tol = 1e-12);

/// Adjoint of the conv linear map (bias excluded): scatters an upstream
/// (batch, out_ch, oh, ow) tensor back to input coordinates.
Tensor conv2d_adjoint(const Conv2dParams& p, const Tensor& upstream, int64_t in_h, int64_t in_w);

/// Exact operator 2-norm of the conv linear map at the given input size,
/// via power iteration on convᵀ∘conv. Bias excluded.
double conv_operator_norm(const Conv2dParams& p, int64_t in_h, int64_t in_w, int max_iters = 300,
                          double tol = 1e-12);

}  // namespace snnconv
