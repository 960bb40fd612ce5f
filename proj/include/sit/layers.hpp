#pragma once

#include <string>
#include <vector>

#include "sit/defs.hpp"
#include "sit/ops.hpp"
#include "sit/rng.hpp"
#include "sit/tensor.hpp"

namespace sit {

// Named view of one parameter tensor and its gradient buffer.
struct ParamView {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

// Forward caches intermediates; backward consumes them exactly once and
// accumulates parameter gradients. One backward at a time per instance.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;

    virtual void collect_params(std::vector<ParamView>& out, const std::string& prefix);

    // Restores any frozen random state before a probe forward so that
    // repeated forwards replay identically (used by grad_check).
    virtual void begin_probe() {}

    std::vector<ParamView> params();
    void zero_grad();

protected:
    void require_cache(bool present, const char* what) const;
};

// k x k x Cin x Cout convolution with bias; zero padding and fixed stride.
class Conv2dLayer : public Layer {
public:
    Conv2dLayer(std::size_t k, std::size_t cin, std::size_t cout,
                std::size_t stride, std::size_t pad);

    // Glorot-uniform kernel, zero bias.
    void init(RngStream rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override;

    // Skips the input-gradient computation (first layer of a frozen stack).
    void set_wants_input_grad(bool wants) { wants_input_grad_ = wants; }

    Tensor kernel, bias;
    Tensor dkernel, dbias;

private:
    std::size_t stride_, pad_;
    bool wants_input_grad_ = true;
    Tensor x_cache_;
    bool has_cache_ = false;
};

class ReluLayer : public Layer {
public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor x_cache_;
    bool has_cache_ = false;
};

// Row-wise affine map: x (n x in, or a length-in vector) -> x W + b.
class DenseLayer : public Layer {
public:
    DenseLayer(std::size_t in, std::size_t out);

    void init(RngStream rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override;

    Tensor weight, bias;
    Tensor dweight, dbias;

private:
    Tensor x_cache_;
    bool vector_input_ = false;
    bool has_cache_ = false;
};

class LayerNormLayer : public Layer {
public:
    explicit LayerNormLayer(std::size_t width, double eps = 1e-5);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override;

    Tensor gamma, beta;
    Tensor dgamma, dbeta;
    double eps;

private:
    Tensor x_cache_;
    bool has_cache_ = false;
};

class SoftmaxRowsLayer : public Layer {
public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor y_cache_;
    bool has_cache_ = false;
};

class GlobalAvgPoolLayer : public Layer {
public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::size_t h_ = 0, w_ = 0;
    bool has_cache_ = false;
};

class GlobalMaxPoolLayer : public Layer {
public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor x_cache_, pooled_cache_;
    bool has_cache_ = false;
};

// Mean over the rows of an n x d input.
class SequencePoolLayer : public Layer {
public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::size_t rows_ = 0;
    bool has_cache_ = false;
};

class DropoutLayer : public Layer {
public:
    DropoutLayer(double rate, RngStream stream);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void begin_probe() override;

    double rate() const { return rate_; }
    RngStream& stream() { return stream_; }

private:
    double rate_;
    RngStream stream_;
    std::uint64_t probe_counter_ = 0;
    Tensor mask_;
    bool identity_ = false;
    bool has_cache_ = false;
};

// Glorot (fan_in + fan_out) uniform fill in flat row-major draw order.
void glorot_uniform_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, RngStream& rng);

} // namespace sit
