#pragma once

#include <vector>

#include "sit/layers.hpp"

namespace sit {

// softmax(Q K^T / sqrt(d_k)) V. d_k is Q's column count. When weights_out is
// non-null the attention matrix is stored there.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    Tensor* weights_out = nullptr);

// Self-attention with per-head Q/K/V projections, concatenation, and an
// output projection. All projections carry biases.
class MultiHeadAttention : public Layer {
public:
    MultiHeadAttention(std::size_t d_model, std::size_t heads, RngStream init_rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override;

    std::size_t heads() const { return heads_.size(); }
    std::size_t head_dim() const { return d_head_; }

    // Attention matrices from the most recent forward, one n x n tensor per
    // head (rows are softmax distributions).
    const std::vector<Tensor>& last_attention_weights() const { return weights_; }

    struct Head {
        Tensor wq, bq, wk, bk, wv, bv;
        Tensor dwq, dbq, dwk, dbk, dwv, dbv;
    };

    Tensor wo, bo;
    Tensor dwo, dbo;

private:
    std::size_t d_model_, d_head_;
    std::vector<Head> heads_;
    // caches
    Tensor x_cache_, concat_cache_;
    std::vector<Tensor> q_, k_, v_, weights_;
    bool has_cache_ = false;
};

// Pre-norm block, Eval-deterministic:
//   h = LN1(x); a = MHA(h, h, h); x = x + Dropout(a)
//   h = LN2(x); f = ReLU(h W1 + b1) W2 + b2; x = x + Dropout(f)
class TransformerBlock : public Layer {
public:
    TransformerBlock(std::size_t d_model, std::size_t heads, std::size_t ffn_dim,
                     double dropout_rate, RngStream init_rng, RngStream dropout_stream);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override;
    void begin_probe() override;

    LayerNormLayer ln1, ln2;
    MultiHeadAttention attention;
    DenseLayer ffn1, ffn2;
    ReluLayer ffn_relu;
    DropoutLayer drop_attn, drop_ffn;

private:
    bool has_cache_ = false;
};

// Sequential stack of blocks; L = 0 is the identity. No final layer norm.
class Encoder : public Layer {
public:
    Encoder(std::size_t blocks, std::size_t d_model, std::size_t heads, std::size_t ffn_dim,
            double dropout_rate, RngStream init_rng, RngStream dropout_rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override;
    void begin_probe() override;

    std::vector<TransformerBlock>& blocks() { return blocks_; }
    const std::vector<TransformerBlock>& blocks() const { return blocks_; }

private:
    std::vector<TransformerBlock> blocks_;
};

// Dropout then affine map to a single scalar.
class RegressionHead : public Layer {
public:
    RegressionHead(std::size_t width, double dropout_rate, RngStream init_rng,
                   RngStream dropout_stream);

    Tensor forward(const Tensor& v, Mode mode) override;  // returns shape {1}
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override;
    void begin_probe() override;

    DropoutLayer dropout;
    DenseLayer dense;

private:
    bool has_cache_ = false;
};

} // namespace sit
