#include "snnconv/layer_ops.hpp"

#include <algorithm>
#include <cmath>

#include "snnconv/errors.hpp"

namespace snnconv {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw_data(what);
}

}  // namespace

Tensor apply_dense(const DenseParams& p, const Tensor& in) {
    require(in.rank() == 2, "dense input must be (batch, features)");
    require(in.dim(1) == p.in_features, "dense input feature count mismatch");
    const int64_t batch = in.dim(0);
    Tensor out({batch, p.out_features});
    const float* w = p.weight.data();
    const float* b = p.bias.data();
    const float* x = in.data();
    float* y = out.data();
    for (int64_t n = 0; n < batch; ++n) {
        const float* xn = x + n * p.in_features;
        float* yn = y + n * p.out_features;
        for (int64_t o = 0; o < p.out_features; ++o) {
            const float* wo = w + o * p.in_features;
            float acc = b[o];
            for (int64_t i = 0; i < p.in_features; ++i) acc += wo[i] * xn[i];
            yn[o] = acc;
        }
    }
    return out;
}

Tensor apply_conv2d(const Conv2dParams& p, const Tensor& in) {
    require(in.rank() == 4, "conv input must be (batch, C, H, W)");
    require(in.dim(1) == p.in_channels, "conv input channel count mismatch");
    const int64_t batch = in.dim(0), ih = in.dim(2), iw = in.dim(3);
    const int64_t oh = (ih + 2 * p.pad_h - p.kernel_h) / p.stride_h + 1;
    const int64_t ow = (iw + 2 * p.pad_w - p.kernel_w) / p.stride_w + 1;
    require(oh >= 1 && ow >= 1, "conv output would be empty");
    Tensor out({batch, p.out_channels, oh, ow});
    const float* w = p.weight.data();
    const float* b = p.bias.data();
    const float* x = in.data();
    float* y = out.data();
    const int64_t in_plane = ih * iw;
    const int64_t out_plane = oh * ow;
    for (int64_t n = 0; n < batch; ++n) {
        const float* xn = x + n * p.in_channels * in_plane;
        float* yn = y + n * p.out_channels * out_plane;
        for (int64_t oc = 0; oc < p.out_channels; ++oc) {
            const float* woc = w + oc * p.in_channels * p.kernel_h * p.kernel_w;
            float* yc = yn + oc * out_plane;
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox) {
                    float acc = b[oc];
                    const int64_t y0 = oy * p.stride_h - p.pad_h;
                    const int64_t x0 = ox * p.stride_w - p.pad_w;
                    for (int64_t ic = 0; ic < p.in_channels; ++ic) {
                        const float* xc = xn + ic * in_plane;
                        const float* wk = woc + ic * p.kernel_h * p.kernel_w;
                        for (int64_t ky = 0; ky < p.kernel_h; ++ky) {
                            const int64_t yy = y0 + ky;
                            if (yy < 0 || yy >= ih) continue;
                            for (int64_t kx = 0; kx < p.kernel_w; ++kx) {
                                const int64_t xx = x0 + kx;
                                if (xx < 0 || xx >= iw) continue;
                                acc += wk[ky * p.kernel_w + kx] * xc[yy * iw + xx];
                            }
                        }
                    }
                    yc[oy * ow + ox] = acc;
                }
            }
        }
    }
    return out;
}

namespace {

template <bool kMax>
Tensor pool2d(const Pool2dParams& p, const Tensor& in) {
    require(in.rank() == 4, "pool input must be (batch, C, H, W)");
    const int64_t batch = in.dim(0), c = in.dim(1), ih = in.dim(2), iw = in.dim(3);
    const int64_t oh = (ih - p.kernel_h) / p.stride_h + 1;
    const int64_t ow = (iw - p.kernel_w) / p.stride_w + 1;
    require(oh >= 1 && ow >= 1, "pool output would be empty");
    Tensor out({batch, c, oh, ow});
    const float* x = in.data();
    float* y = out.data();
    const float inv_window = 1.0f / static_cast<float>(p.kernel_h * p.kernel_w);
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const float* xc = x + (n * c + ch) * ih * iw;
            float* yc = y + (n * c + ch) * oh * ow;
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox) {
                    const int64_t y0 = oy * p.stride_h;
                    const int64_t x0 = ox * p.stride_w;
                    if constexpr (kMax) {
                        // Ties keep the first maximum in row-major window order.
                        float best = xc[y0 * iw + x0];
                        for (int64_t ky = 0; ky < p.kernel_h; ++ky) {
                            for (int64_t kx = 0; kx < p.kernel_w; ++kx) {
                                const float v = xc[(y0 + ky) * iw + (x0 + kx)];
                                if (v > best) best = v;
                            }
                        }
                        yc[oy * ow + ox] = best;
                    } else {
                        float acc = 0.0f;
                        for (int64_t ky = 0; ky < p.kernel_h; ++ky) {
                            for (int64_t kx = 0; kx < p.kernel_w; ++kx) {
                                acc += xc[(y0 + ky) * iw + (x0 + kx)];
                            }
                        }
                        yc[oy * ow + ox] = acc * inv_window;
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

Tensor apply_maxpool(const Pool2dParams& p, const Tensor& in) { return pool2d<true>(p, in); }

Tensor apply_avgpool(const Pool2dParams& p, const Tensor& in) { return pool2d<false>(p, in); }

Tensor apply_batchnorm(const BatchNormParams& p, const Tensor& in) {
    require(in.rank() == 4 || in.rank() == 2, "batchnorm input must be flat or (batch, C, H, W)");
    const int64_t c = in.dim(1);
    require(c == p.channels, "batchnorm channel count mismatch");
    Tensor out = in;
    const int64_t plane = in.rank() == 4 ? in.dim(2) * in.dim(3) : 1;
    const int64_t batch = in.dim(0);
    for (int64_t ch = 0; ch < c; ++ch) {
        const float inv_std = 1.0f / std::sqrt(p.running_var[ch] + p.eps);
        const float scale = p.gamma[ch] * inv_std;
        const float shift = p.beta[ch] - p.running_mean[ch] * scale;
        for (int64_t n = 0; n < batch; ++n) {
            float* y = out.data() + (n * c + ch) * plane;
            for (int64_t i = 0; i < plane; ++i) y[i] = y[i] * scale + shift;
        }
    }
    return out;
}

Tensor apply_residual_add(const ResidualAddParams& p, const Tensor& in, const Tensor& source) {
    require(in.same_shape(source), "residual source shape mismatch");
    Tensor out = in;
    const int64_t batch = in.dim(0);
    const int64_t c = in.dim(1);
    const int64_t plane = in.numel() / (batch * c);
    if (p.scale.empty()) {
        for (int64_t i = 0; i < in.numel(); ++i) out[i] += source[i];
        return out;
    }
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const float s = p.scale.size() == 1 ? p.scale[0] : p.scale[static_cast<size_t>(ch)];
            float* y = out.data() + (n * c + ch) * plane;
            const float* src = source.data() + (n * c + ch) * plane;
            for (int64_t i = 0; i < plane; ++i) y[i] += s * src[i];
        }
    }
    return out;
}

Tensor apply_flatten(const Tensor& in) {
    const int64_t batch = in.dim(0);
    return in.reshaped({batch, in.numel() / batch});
}

Tensor apply_relu(const Tensor& in) {
    Tensor out = in;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(0.0f, out[i]);
    return out;
}

Tensor apply_clip(const ActivationParams& slot, const Tensor& in) {
    require(!slot.theta.empty(), "clip activation requires thresholds");
    Tensor out = in;
    const int64_t batch = in.dim(0);
    const int64_t c = in.dim(1);
    const int64_t plane = in.numel() / (batch * c);
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const float t = slot_theta(slot, ch);
            float* y = out.data() + (n * c + ch) * plane;
            for (int64_t i = 0; i < plane; ++i) y[i] = std::clamp(y[i], 0.0f, t);
        }
    }
    return out;
}

}  // namespace snnconv
