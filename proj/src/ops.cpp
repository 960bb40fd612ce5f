#include "sit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sit/error.hpp"
#include "sit/kernels.hpp"

namespace sit::ops {
namespace {

using kernels::active;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeMismatch(std::string(what) + ": expected rank " + std::to_string(rank) +
                            ", got shape " + t.shape_str());
    }
}

} // namespace

double sum_order_invariant(const double* x, std::size_t n) {
    if (n <= 1) return n == 0 ? 0.0 : x[0];
    if (n <= 16) {
        double buf[16];
        std::memcpy(buf, x, n * sizeof(double));
        std::sort(buf, buf + n);
        double acc = buf[0];
        for (std::size_t i = 1; i < n; ++i) acc += buf[i];
        return acc;
    }
    std::vector<double> buf(x, x + n);
    std::sort(buf.begin(), buf.end());
    double acc = buf[0];
    for (std::size_t i = 1; i < n; ++i) acc += buf[i];
    return acc;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    const std::size_t m = a.extent(0), k = a.extent(1);
    if (b.extent(0) != k) {
        throw ShapeMismatch("matmul inner extents differ: " + a.shape_str() + " vs " +
                            b.shape_str());
    }
    const std::size_t n = b.extent(1);
    Tensor c({m, n});
    const auto& kt = active();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c.data() + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            kt.axpy(crow, a.data()[i * k + t], b.data() + t * n, n);
        }
    }
    return c;
}

void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dc, Tensor& da, Tensor& db) {
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    if (dc.rank() != 2 || dc.extent(0) != m || dc.extent(1) != n) {
        throw ShapeMismatch("matmul_backward upstream shape " + dc.shape_str());
    }
    if (!da.same_shape(a) || !db.same_shape(b)) {
        throw ShapeMismatch("matmul_backward gradient buffers mismatch");
    }
    const auto& kt = active();
    for (std::size_t i = 0; i < m; ++i) {
        const double* dcrow = dc.data() + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            da.data()[i * k + t] += kt.dot(dcrow, b.data() + t * n, n);
            kt.axpy(db.data() + t * n, a.data()[i * k + t], dcrow, n);
        }
    }
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
    require_rank(x, 3, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    require_rank(bias, 1, "conv2d bias");
    const std::size_t h = x.extent(0), w = x.extent(1), cin = x.extent(2);
    const std::size_t kh = kernel.extent(0), kw = kernel.extent(1);
    const std::size_t cout = kernel.extent(3);
    if (kh != kw) {
        throw InvalidKernel("conv2d kernel must be square, got " + kernel.shape_str());
    }
    if (kernel.extent(2) != cin) {
        throw ShapeMismatch("conv2d channel mismatch: input " + x.shape_str() + " vs kernel " +
                            kernel.shape_str());
    }
    if (bias.extent(0) != cout) {
        throw ShapeMismatch("conv2d bias extent " + bias.shape_str() + " vs Cout " +
                            std::to_string(cout));
    }
    if (stride == 0) throw InvalidKernel("conv2d stride must be >= 1");
    if (h + 2 * pad < kh || w + 2 * pad < kh) {
        throw ShapeMismatch("conv2d kernel larger than padded input");
    }
    const std::size_t hout = (h + 2 * pad - kh) / stride + 1;
    const std::size_t wout = (w + 2 * pad - kh) / stride + 1;

    Tensor y({hout, wout, cout});
    const auto& kt = active();
    for (std::size_t ho = 0; ho < hout; ++ho) {
        const std::ptrdiff_t h0 = static_cast<std::ptrdiff_t>(ho * stride) -
                                  static_cast<std::ptrdiff_t>(pad);
        for (std::size_t wo = 0; wo < wout; ++wo) {
            const std::ptrdiff_t w0 = static_cast<std::ptrdiff_t>(wo * stride) -
                                      static_cast<std::ptrdiff_t>(pad);
            double* yrow = y.data() + (ho * wout + wo) * cout;
            for (std::size_t c = 0; c < cout; ++c) yrow[c] = bias[c];
            for (std::size_t dk = 0; dk < kh; ++dk) {
                const std::ptrdiff_t hi = h0 + static_cast<std::ptrdiff_t>(dk);
                if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t dl = 0; dl < kh; ++dl) {
                    const std::ptrdiff_t wi = w0 + static_cast<std::ptrdiff_t>(dl);
                    if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(w)) continue;
                    const double* xrow = x.data() + (static_cast<std::size_t>(hi) * w +
                                                     static_cast<std::size_t>(wi)) * cin;
                    const double* krow = kernel.data() + ((dk * kh + dl) * cin) * cout;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        kt.axpy(yrow, xrow[ci], krow + ci * cout, cout);
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    require_rank(kernel, 4, "conv2d kernel");
    const std::size_t k = kernel.extent(0);
    if (k % 2 == 0) {
        throw InvalidKernel("conv2d_same requires odd kernel size, got " + std::to_string(k));
    }
    return conv2d(x, kernel, bias, 1, (k - 1) / 2);
}

void conv2d_backward(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t pad,
                     const Tensor& dy, Tensor* dx, Tensor& dk, Tensor& db) {
    const std::size_t h = x.extent(0), w = x.extent(1), cin = x.extent(2);
    const std::size_t kk = kernel.extent(0);
    const std::size_t cout = kernel.extent(3);
    const std::size_t hout = dy.extent(0), wout = dy.extent(1);
    if (dy.extent(2) != cout) {
        throw ShapeMismatch("conv2d_backward upstream channels " + dy.shape_str());
    }
    if (!dk.same_shape(kernel) || db.extent(0) != cout) {
        throw ShapeMismatch("conv2d_backward gradient buffers mismatch");
    }
    if (dx && !dx->same_shape(x)) {
        throw ShapeMismatch("conv2d_backward dx buffer mismatch");
    }
    const auto& kt = active();
    for (std::size_t ho = 0; ho < hout; ++ho) {
        const std::ptrdiff_t h0 = static_cast<std::ptrdiff_t>(ho * stride) -
                                  static_cast<std::ptrdiff_t>(pad);
        for (std::size_t wo = 0; wo < wout; ++wo) {
            const std::ptrdiff_t w0 = static_cast<std::ptrdiff_t>(wo * stride) -
                                      static_cast<std::ptrdiff_t>(pad);
            const double* dyrow = dy.data() + (ho * wout + wo) * cout;
            kt.add(db.data(), dyrow, cout);
            for (std::size_t dkh = 0; dkh < kk; ++dkh) {
                const std::ptrdiff_t hi = h0 + static_cast<std::ptrdiff_t>(dkh);
                if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t dkw = 0; dkw < kk; ++dkw) {
                    const std::ptrdiff_t wi = w0 + static_cast<std::ptrdiff_t>(dkw);
                    if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(w)) continue;
                    const std::size_t xoff = (static_cast<std::size_t>(hi) * w +
                                              static_cast<std::size_t>(wi)) * cin;
                    const std::size_t koff = ((dkh * kk + dkw) * cin) * cout;
                    const double* xrow = x.data() + xoff;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        kt.axpy(dk.data() + koff + ci * cout, xrow[ci], dyrow, cout);
                        if (dx) {
                            dx->data()[xoff + ci] +=
                                kt.dot(dyrow, kernel.data() + koff + ci * cout, cout);
                        }
                    }
                }
            }
        }
    }
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    kernels::active().relu(y.data(), x.data(), x.size());
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    if (!x.same_shape(dy)) {
        throw ShapeMismatch("relu_backward shapes differ: " + x.shape_str() + " vs " +
                            dy.shape_str());
    }
    Tensor dx(x.shape());
    kernels::active().relu_grad(dx.data(), x.data(), dy.data(), x.size());
    return dx;
}

Tensor softmax_rows(const Tensor& x) {
    require_rank(x, 2, "softmax_rows input");
    const std::size_t n = x.extent(0), m = x.extent(1);
    Tensor y(x.shape());
    const auto& kt = active();
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = x.data() + i * m;
        double* yr = y.data() + i * m;
        const double rowmax = xr[kt.argmax(xr, m)];
        for (std::size_t j = 0; j < m; ++j) {
            yr[j] = std::exp(xr[j] - rowmax);
        }
        // Order-invariant denominator: rows of attention logits span the
        // scale sequence, and permuting it must not change the rounding.
        const double total = sum_order_invariant(yr, m);
        kt.scale(yr, 1.0 / total, m);
    }
    return y;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy) {
    if (!y.same_shape(dy)) {
        throw ShapeMismatch("softmax_rows_backward shapes differ");
    }
    const std::size_t n = y.extent(0), m = y.extent(1);
    Tensor dx(y.shape());
    const auto& kt = active();
    for (std::size_t i = 0; i < n; ++i) {
        const double* yr = y.data() + i * m;
        const double* dyr = dy.data() + i * m;
        double* dxr = dx.data() + i * m;
        const double inner = kt.dot(yr, dyr, m);
        for (std::size_t j = 0; j < m; ++j) {
            dxr[j] = yr[j] * (dyr[j] - inner);
        }
    }
    return dx;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_rank(x, 2, "layer_norm input");
    if (eps <= 0.0) throw Error("layer_norm eps must be > 0");
    const std::size_t n = x.extent(0), d = x.extent(1);
    if (gamma.extent(0) != d || beta.extent(0) != d) {
        throw ShapeMismatch("layer_norm gamma/beta width mismatch");
    }
    Tensor y(x.shape());
    const auto& kt = active();
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = x.data() + i * d;
        double* yr = y.data() + i * d;
        const double mean = kt.sum(xr, d) / static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xr[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            yr[j] = (xr[j] - mean) * inv * gamma[j] + beta[j];
        }
    }
    return y;
}

void layer_norm_backward(const Tensor& x, const Tensor& gamma, double eps, const Tensor& dy,
                         Tensor& dx, Tensor& dgamma, Tensor& dbeta) {
    const std::size_t n = x.extent(0), d = x.extent(1);
    if (!dy.same_shape(x) || !dx.same_shape(x)) {
        throw ShapeMismatch("layer_norm_backward shape mismatch");
    }
    const auto& kt = active();
    const double dd = static_cast<double>(d);
    std::vector<double> xhat(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = x.data() + i * d;
        const double* dyr = dy.data() + i * d;
        double* dxr = dx.data() + i * d;
        const double mean = kt.sum(xr, d) / dd;
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xr[j] - mean;
            var += c * c;
        }
        var /= dd;
        const double inv = 1.0 / std::sqrt(var + eps);
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            xhat[j] = (xr[j] - mean) * inv;
            const double dxh = dyr[j] * gamma[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[j];
        }
        mean_dxhat /= dd;
        mean_dxhat_xhat /= dd;
        for (std::size_t j = 0; j < d; ++j) {
            const double dxh = dyr[j] * gamma[j];
            dxr[j] += inv * (dxh - mean_dxhat - xhat[j] * mean_dxhat_xhat);
            dgamma[j] += dyr[j] * xhat[j];
            dbeta[j] += dyr[j];
        }
    }
}

Tensor global_avg_pool_hw(const Tensor& x) {
    require_rank(x, 3, "global_avg_pool_hw input");
    const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
    Tensor v({c});
    const auto& kt = active();
    for (std::size_t p = 0; p < h * w; ++p) {
        kt.add(v.data(), x.data() + p * c, c);
    }
    kt.scale(v.data(), 1.0 / static_cast<double>(h * w), c);
    return v;
}

Tensor global_avg_pool_hw_backward(std::size_t h, std::size_t w, const Tensor& dy) {
    require_rank(dy, 1, "global_avg_pool_hw upstream");
    const std::size_t c = dy.extent(0);
    Tensor dx({h, w, c});
    const double scale = 1.0 / static_cast<double>(h * w);
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t j = 0; j < c; ++j) {
            dx[p * c + j] = dy[j] * scale;
        }
    }
    return dx;
}

Tensor global_max_pool_hw(const Tensor& x) {
    require_rank(x, 3, "global_max_pool_hw input");
    const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
    Tensor v({c}, std::vector<double>(x.data(), x.data() + c));
    const auto& kt = active();
    for (std::size_t p = 1; p < h * w; ++p) {
        kt.max(v.data(), x.data() + p * c, c);
    }
    return v;
}

Tensor global_max_pool_hw_backward(const Tensor& x, const Tensor& pooled, const Tensor& dy) {
    const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
    if (pooled.extent(0) != c || dy.extent(0) != c) {
        throw ShapeMismatch("global_max_pool_hw_backward channel mismatch");
    }
    Tensor dx({h, w, c});
    // First maximal location in row-major (h, w) scan order takes the
    // whole gradient for its channel.
    for (std::size_t j = 0; j < c; ++j) {
        for (std::size_t p = 0; p < h * w; ++p) {
            if (x[p * c + j] == pooled[j]) {
                dx[p * c + j] = dy[j];
                break;
            }
        }
    }
    return dx;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, RngStream& rng, Tensor* mask_out) {
    if (rate < 0.0 || rate >= 1.0) {
        throw InvalidRate("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::kEval || rate == 0.0) {
        if (mask_out) *mask_out = Tensor();
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor mask(x.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.next_unit() < rate ? 0.0 : keep_scale;
    }
    Tensor y = x;
    kernels::active().mul(y.data(), mask.data(), y.size());
    if (mask_out) *mask_out = std::move(mask);
    return y;
}

} // namespace sit::ops
