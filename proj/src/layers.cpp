#include "sit/layers.hpp"

#include <cmath>

#include "sit/error.hpp"
#include "sit/kernels.hpp"

namespace sit {

void Layer::collect_params(std::vector<ParamView>&, const std::string&) {}

std::vector<ParamView> Layer::params() {
    std::vector<ParamView> out;
    collect_params(out, "");
    return out;
}

void Layer::zero_grad() {
    for (ParamView& p : params()) p.grad->zero();
}

void Layer::require_cache(bool present, const char* what) const {
    if (!present) {
        throw Error(std::string(what) + ": backward called without a matching forward");
    }
}

void glorot_uniform_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.next_uniform(-limit, limit);
    }
}

// ---------------------------------------------------------------- Conv2d

Conv2dLayer::Conv2dLayer(std::size_t k, std::size_t cin, std::size_t cout,
                         std::size_t stride, std::size_t pad)
    : kernel({k, k, cin, cout}),
      bias({cout}),
      dkernel({k, k, cin, cout}),
      dbias({cout}),
      stride_(stride),
      pad_(pad) {}

void Conv2dLayer::init(RngStream rng) {
    const std::size_t k = kernel.extent(0);
    const std::size_t cin = kernel.extent(2), cout = kernel.extent(3);
    glorot_uniform_fill(kernel, k * k * cin, k * k * cout, rng);
    bias.zero();
}

Tensor Conv2dLayer::forward(const Tensor& x, Mode) {
    x_cache_ = x;
    has_cache_ = true;
    return ops::conv2d(x, kernel, bias, stride_, pad_);
}

Tensor Conv2dLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "Conv2dLayer");
    has_cache_ = false;
    Tensor dx;
    if (wants_input_grad_) dx = Tensor(x_cache_.shape());
    ops::conv2d_backward(x_cache_, kernel, stride_, pad_, dy,
                         wants_input_grad_ ? &dx : nullptr, dkernel, dbias);
    return dx;
}

void Conv2dLayer::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back({prefix + "kernel", &kernel, &dkernel});
    out.push_back({prefix + "bias", &bias, &dbias});
}

// ------------------------------------------------------------------ Relu

Tensor ReluLayer::forward(const Tensor& x, Mode) {
    x_cache_ = x;
    has_cache_ = true;
    return ops::relu(x);
}

Tensor ReluLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "ReluLayer");
    has_cache_ = false;
    return ops::relu_backward(x_cache_, dy);
}

// ----------------------------------------------------------------- Dense

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : weight({in, out}), bias({out}), dweight({in, out}), dbias({out}) {}

void DenseLayer::init(RngStream rng) {
    glorot_uniform_fill(weight, weight.extent(0), weight.extent(1), rng);
    bias.zero();
}

Tensor DenseLayer::forward(const Tensor& x, Mode) {
    vector_input_ = x.rank() == 1;
    Tensor rows = vector_input_ ? Tensor({1, x.extent(0)},
                                         std::vector<double>(x.data(), x.data() + x.size()))
                                : x;
    x_cache_ = rows;
    has_cache_ = true;
    Tensor y = ops::matmul(rows, weight);
    const std::size_t n = y.extent(0), d = y.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
        kernels::active().add(y.data() + i * d, bias.data(), d);
    }
    if (vector_input_) {
        return Tensor({d}, std::vector<double>(y.data(), y.data() + d));
    }
    return y;
}

Tensor DenseLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "DenseLayer");
    has_cache_ = false;
    const std::size_t out = weight.extent(1);
    Tensor dyr = dy.rank() == 1 ? Tensor({1, dy.extent(0)},
                                         std::vector<double>(dy.data(), dy.data() + dy.size()))
                                : dy;
    const std::size_t n = dyr.extent(0);
    if (dyr.extent(1) != out) {
        throw ShapeMismatch("DenseLayer backward width mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        kernels::active().add(dbias.data(), dyr.data() + i * out, out);
    }
    Tensor dx(x_cache_.shape());
    // dx = dy * W^T, dW += x^T * dy
    const std::size_t in = weight.extent(0);
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < n; ++i) {
        const double* dyrow = dyr.data() + i * out;
        double* dxrow = dx.data() + i * in;
        const double* xrow = x_cache_.data() + i * in;
        for (std::size_t t = 0; t < in; ++t) {
            dxrow[t] = kt.dot(dyrow, weight.data() + t * out, out);
            kt.axpy(dweight.data() + t * out, xrow[t], dyrow, out);
        }
    }
    if (vector_input_) {
        return Tensor({in}, std::vector<double>(dx.data(), dx.data() + in));
    }
    return dx;
}

void DenseLayer::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back({prefix + "weight", &weight, &dweight});
    out.push_back({prefix + "bias", &bias, &dbias});
}

// ------------------------------------------------------------- LayerNorm

LayerNormLayer::LayerNormLayer(std::size_t width, double eps_in)
    : gamma(Tensor::full({width}, 1.0)),
      beta({width}),
      dgamma({width}),
      dbeta({width}),
      eps(eps_in) {}

Tensor LayerNormLayer::forward(const Tensor& x, Mode) {
    x_cache_ = x;
    has_cache_ = true;
    return ops::layer_norm(x, gamma, beta, eps);
}

Tensor LayerNormLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "LayerNormLayer");
    has_cache_ = false;
    Tensor dx(x_cache_.shape());
    ops::layer_norm_backward(x_cache_, gamma, eps, dy, dx, dgamma, dbeta);
    return dx;
}

void LayerNormLayer::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back({prefix + "gamma", &gamma, &dgamma});
    out.push_back({prefix + "beta", &beta, &dbeta});
}

// ----------------------------------------------------------- SoftmaxRows

Tensor SoftmaxRowsLayer::forward(const Tensor& x, Mode) {
    y_cache_ = ops::softmax_rows(x);
    has_cache_ = true;
    return y_cache_;
}

Tensor SoftmaxRowsLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "SoftmaxRowsLayer");
    has_cache_ = false;
    return ops::softmax_rows_backward(y_cache_, dy);
}

// ----------------------------------------------------------------- Pools

Tensor GlobalAvgPoolLayer::forward(const Tensor& x, Mode) {
    h_ = x.extent(0);
    w_ = x.extent(1);
    has_cache_ = true;
    return ops::global_avg_pool_hw(x);
}

Tensor GlobalAvgPoolLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "GlobalAvgPoolLayer");
    has_cache_ = false;
    return ops::global_avg_pool_hw_backward(h_, w_, dy);
}

Tensor GlobalMaxPoolLayer::forward(const Tensor& x, Mode) {
    x_cache_ = x;
    pooled_cache_ = ops::global_max_pool_hw(x);
    has_cache_ = true;
    return pooled_cache_;
}

Tensor GlobalMaxPoolLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "GlobalMaxPoolLayer");
    has_cache_ = false;
    return ops::global_max_pool_hw_backward(x_cache_, pooled_cache_, dy);
}

Tensor SequencePoolLayer::forward(const Tensor& x, Mode) {
    if (x.rank() != 2) {
        throw ShapeMismatch("SequencePoolLayer expects n x d input, got " + x.shape_str());
    }
    rows_ = x.extent(0);
    has_cache_ = true;
    const std::size_t d = x.extent(1);
    Tensor v({d});
    // Column means accumulated order-invariantly: the pooled vector must be
    // bitwise stable under row permutation.
    std::vector<double> column(rows_);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < rows_; ++i) column[i] = x.data()[i * d + j];
        v[j] = ops::sum_order_invariant(column.data(), rows_) / static_cast<double>(rows_);
    }
    return v;
}

Tensor SequencePoolLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "SequencePoolLayer");
    has_cache_ = false;
    const std::size_t d = dy.extent(0);
    Tensor dx({rows_, d});
    const double scale = 1.0 / static_cast<double>(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            dx.data()[i * d + j] = dy[j] * scale;
        }
    }
    return dx;
}

// --------------------------------------------------------------- Dropout

DropoutLayer::DropoutLayer(double rate, RngStream stream)
    : rate_(rate), stream_(stream), probe_counter_(stream.counter()) {}

Tensor DropoutLayer::forward(const Tensor& x, Mode mode) {
    Tensor y = ops::dropout(x, rate_, mode, stream_, &mask_);
    identity_ = mask_.empty();
    has_cache_ = true;
    return y;
}

Tensor DropoutLayer::backward(const Tensor& dy) {
    require_cache(has_cache_, "DropoutLayer");
    has_cache_ = false;
    if (identity_) return dy;
    Tensor dx = dy;
    kernels::active().mul(dx.data(), mask_.data(), dx.size());
    return dx;
}

void DropoutLayer::begin_probe() {
    stream_.rewind(probe_counter_);
}

} // namespace sit
