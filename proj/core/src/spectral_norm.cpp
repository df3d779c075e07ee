#include "snnconv/spectral_norm.hpp"

#include <cmath>
#include <vector>

#include "snnconv/errors.hpp"
#include "snnconv/layer_ops.hpp"

namespace snnconv {

namespace {

// Fixed deterministic start vector; mild pseudo-noise avoids starting
// orthogonal to the dominant singular direction.
void fill_start(std::vector<double>& v) {
    uint64_t s = 0x9e3779b97f4a7c15ull;
    for (auto& x : v) {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        x = 1.0 + 1e-3 * static_cast<double>(s % 1024) / 1024.0;
    }
}

double norm2(const std::vector<double>& v) {
    double acc = 0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

double spectral_norm(const float* m, int64_t rows, int64_t cols, int max_iters, double tol) {
    if (rows <= 0 || cols <= 0) throw_data("spectral norm of an empty matrix");
    std::vector<double> v(static_cast<size_t>(cols));
    std::vector<double> u(static_cast<size_t>(rows));
    fill_start(v);
    double vn = norm2(v);
    for (auto& x : v) x /= vn;

    double sigma = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        // u = M v
        for (int64_t r = 0; r < rows; ++r) {
            const float* row = m + r * cols;
            double acc = 0;
            for (int64_t c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * v[static_cast<size_t>(c)];
            u[static_cast<size_t>(r)] = acc;
        }
        const double sigma_next = norm2(u);
        if (sigma_next == 0.0) return 0.0;
        // v = Mᵀ u / |Mᵀ u|
        for (auto& x : v) x = 0.0;
        for (int64_t r = 0; r < rows; ++r) {
            const float* row = m + r * cols;
            const double ur = u[static_cast<size_t>(r)];
            for (int64_t c = 0; c < cols; ++c) v[static_cast<size_t>(c)] += static_cast<double>(row[c]) * ur;
        }
        const double wn = norm2(v);
        if (wn == 0.0) return sigma_next;
        for (auto& x : v) x /= wn;
        // |Mᵀ u| / |u| is the Rayleigh estimate of sigma at this step.
        const double est = wn / sigma_next;
        if (std::abs(est - sigma) <= tol * std::max(1.0, est)) {
            sigma = est;
            break;
        }
        sigma = est;
    }
    return sigma;
}

double reshaped_kernel_norm(const LayerSpec& layer, int max_iters, double tol) {
    if (layer.kind == LayerKind::Dense) {
        const auto& p = layer.as<DenseParams>();
        return spectral_norm(p.weight.data(), p.out_features, p.in_features, max_iters, tol);
    }
    if (layer.kind == LayerKind::Conv2d) {
        const auto& p = layer.as<Conv2dParams>();
        return spectral_norm(p.weight.data(), p.out_channels,
                             p.in_channels * p.kernel_h * p.kernel_w, max_iters, tol);
    }
    throw_data("spectral norm requires a dense or conv layer");
}

Tensor conv2d_adjoint(const Conv2dParams& p, const Tensor& upstream, int64_t in_h, int64_t in_w) {
    if (upstream.rank() != 4 || upstream.dim(1) != p.out_channels) {
        throw_data("conv adjoint input must be (batch, out_channels, oh, ow)");
    }
    const int64_t batch = upstream.dim(0), oh = upstream.dim(2), ow = upstream.dim(3);
    Tensor out({batch, p.in_channels, in_h, in_w});
    const float* w = p.weight.data();
    const float* u = upstream.data();
    float* y = out.data();
    const int64_t in_plane = in_h * in_w;
    const int64_t out_plane = oh * ow;
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t oc = 0; oc < p.out_channels; ++oc) {
            const float* uc = u + (n * p.out_channels + oc) * out_plane;
            const float* woc = w + oc * p.in_channels * p.kernel_h * p.kernel_w;
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox) {
                    const float g = uc[oy * ow + ox];
                    if (g == 0.0f) continue;
                    const int64_t y0 = oy * p.stride_h - p.pad_h;
                    const int64_t x0 = ox * p.stride_w - p.pad_w;
                    for (int64_t ic = 0; ic < p.in_channels; ++ic) {
                        float* yc = y + (n * p.in_channels + ic) * in_plane;
                        const float* wk = woc + ic * p.kernel_h * p.kernel_w;
                        for (int64_t ky = 0; ky < p.kernel_h; ++ky) {
                            const int64_t yy = y0 + ky;
                            if (yy < 0 || yy >= in_h) continue;
                            for (int64_t kx = 0; kx < p.kernel_w; ++kx) {
                                const int64_t xx = x0 + kx;
                                if (xx < 0 || xx >= in_w) continue;
                                yc[yy * in_w + xx] += wk[ky * p.kernel_w + kx] * g;
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

double conv_operator_norm(const Conv2dParams& p, int64_t in_h, int64_t in_w, int max_iters,
                          double tol) {
    Conv2dParams linear = p;
    linear.bias = Tensor({p.out_channels});  // norm of the linear part only

    Tensor x({1, p.in_channels, in_h, in_w});
    {
        std::vector<double> start(static_cast<size_t>(x.numel()));
        fill_start(start);
        for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(start[static_cast<size_t>(i)]);
    }
    auto normalize = [](Tensor& t) {
        double acc = 0;
        for (int64_t i = 0; i < t.numel(); ++i) acc += static_cast<double>(t[i]) * t[i];
        const double n = std::sqrt(acc);
        if (n == 0.0) return 0.0;
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(t[i] / n);
        return n;
    };
    normalize(x);

    double sigma = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Tensor y = apply_conv2d(linear, x);
        double yn = 0;
        for (int64_t i = 0; i < y.numel(); ++i) yn += static_cast<double>(y[i]) * y[i];
        const double est = std::sqrt(yn);
        if (est == 0.0) return 0.0;
        x = conv2d_adjoint(linear, y, in_h, in_w);
        const double back = normalize(x);
        if (back == 0.0) return est;
        const double refined = back / est;  // |Aᵀy| / |y| with |x| = 1
        if (std::abs(refined - sigma) <= tol * std::max(1.0, refined)) {
            sigma = refined;
            break;
        }
        sigma = refined;
    }
    return sigma;
}

}  // namespace snnconv
