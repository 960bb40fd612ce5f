#include "sit/transformer.hpp"

#include <cmath>
#include <cstring>

#include "sit/error.hpp"
#include "sit/kernels.hpp"

namespace sit {
namespace {

Tensor transpose(const Tensor& a) {
    const std::size_t n = a.extent(0), m = a.extent(1);
    Tensor t({m, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            t.data()[j * n + i] = a.data()[i * m + j];
        }
    }
    return t;
}

// weights (n x k) * values (k x d) with the reduction over keys accumulated
// in value order: permuting the key rows permutes the term multiset only, so
// the product is bitwise invariant to sequence order.
Tensor weighted_value_sum(const Tensor& weights, const Tensor& values) {
    const std::size_t n = weights.extent(0), k = weights.extent(1);
    const std::size_t d = values.extent(1);
    Tensor out({n, d});
    std::vector<double> terms(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t t = 0; t < k; ++t) {
                terms[t] = weights.data()[i * k + t] * values.data()[t * d + j];
            }
            out.data()[i * d + j] = ops::sum_order_invariant(terms.data(), k);
        }
    }
    return out;
}

} // namespace

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    Tensor* weights_out) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
        throw ShapeMismatch("attention operands must be rank 2");
    }
    if (q.extent(1) != k.extent(1)) {
        throw ShapeMismatch("attention d_k mismatch: " + q.shape_str() + " vs " + k.shape_str());
    }
    if (k.extent(0) != v.extent(0)) {
        throw ShapeMismatch("attention key/value row mismatch: " + k.shape_str() + " vs " +
                            v.shape_str());
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.extent(1)));
    Tensor logits = ops::matmul(q, transpose(k));
    kernels::active().scale(logits.data(), scale, logits.size());
    Tensor weights = ops::softmax_rows(logits);
    Tensor out = weighted_value_sum(weights, v);
    if (weights_out) *weights_out = std::move(weights);
    return out;
}

// ---------------------------------------------------------------- MHA

MultiHeadAttention::MultiHeadAttention(std::size_t d_model, std::size_t heads,
                                       RngStream init_rng)
    : wo({d_model, d_model}),
      bo({d_model}),
      dwo({d_model, d_model}),
      dbo({d_model}),
      d_model_(d_model) {
    if (heads == 0 || d_model % heads != 0) {
        throw ShapeMismatch("attention heads must divide the model width exactly");
    }
    d_head_ = d_model / heads;
    heads_.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Head head{
            Tensor({d_model, d_head_}), Tensor({d_head_}),
            Tensor({d_model, d_head_}), Tensor({d_head_}),
            Tensor({d_model, d_head_}), Tensor({d_head_}),
            Tensor({d_model, d_head_}), Tensor({d_head_}),
            Tensor({d_model, d_head_}), Tensor({d_head_}),
            Tensor({d_model, d_head_}), Tensor({d_head_}),
        };
        RngStream hr = init_rng.fork(h);
        glorot_uniform_fill(head.wq, d_model, d_head_, hr);
        glorot_uniform_fill(head.wk, d_model, d_head_, hr);
        glorot_uniform_fill(head.wv, d_model, d_head_, hr);
        heads_.push_back(std::move(head));
    }
    RngStream orng = init_rng.fork(heads);
    glorot_uniform_fill(wo, d_model, d_model, orng);
    q_.resize(heads);
    k_.resize(heads);
    v_.resize(heads);
    weights_.resize(heads);
}

Tensor MultiHeadAttention::forward(const Tensor& x, Mode) {
    if (x.rank() != 2 || x.extent(1) != d_model_) {
        throw ShapeMismatch("attention input must be n x " + std::to_string(d_model_) +
                            ", got " + x.shape_str());
    }
    const std::size_t n = x.extent(0);
    x_cache_ = x;
    concat_cache_ = Tensor({n, d_model_});
    const auto& kt = kernels::active();
    for (std::size_t h = 0; h < heads_.size(); ++h) {
        Head& head = heads_[h];
        q_[h] = ops::matmul(x, head.wq);
        k_[h] = ops::matmul(x, head.wk);
        v_[h] = ops::matmul(x, head.wv);
        for (std::size_t i = 0; i < n; ++i) {
            kt.add(q_[h].data() + i * d_head_, head.bq.data(), d_head_);
            kt.add(k_[h].data() + i * d_head_, head.bk.data(), d_head_);
            kt.add(v_[h].data() + i * d_head_, head.bv.data(), d_head_);
        }
        const Tensor out_h = scaled_dot_product_attention(q_[h], k_[h], v_[h], &weights_[h]);
        for (std::size_t i = 0; i < n; ++i) {
            std::memcpy(concat_cache_.data() + i * d_model_ + h * d_head_,
                        out_h.data() + i * d_head_, d_head_ * sizeof(double));
        }
    }
    Tensor y = ops::matmul(concat_cache_, wo);
    for (std::size_t i = 0; i < n; ++i) {
        kt.add(y.data() + i * d_model_, bo.data(), d_model_);
    }
    has_cache_ = true;
    return y;
}

Tensor MultiHeadAttention::backward(const Tensor& dy) {
    require_cache(has_cache_, "MultiHeadAttention");
    has_cache_ = false;
    const std::size_t n = x_cache_.extent(0);
    const auto& kt = kernels::active();

    // Output projection.
    for (std::size_t i = 0; i < n; ++i) {
        kt.add(dbo.data(), dy.data() + i * d_model_, d_model_);
    }
    Tensor dconcat({n, d_model_});
    ops::matmul_backward(concat_cache_, wo, dy, dconcat, dwo);

    Tensor dx({n, d_model_});
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head_));
    for (std::size_t h = 0; h < heads_.size(); ++h) {
        Head& head = heads_[h];
        Tensor dout_h({n, d_head_});
        for (std::size_t i = 0; i < n; ++i) {
            std::memcpy(dout_h.data() + i * d_head_,
                        dconcat.data() + i * d_model_ + h * d_head_, d_head_ * sizeof(double));
        }
        // out_h = W V with W = softmax(Q K^T * scale)
        Tensor dweights = ops::matmul(dout_h, transpose(v_[h]));
        Tensor dv = ops::matmul(transpose(weights_[h]), dout_h);
        Tensor dlogits = ops::softmax_rows_backward(weights_[h], dweights);
        kt.scale(dlogits.data(), scale, dlogits.size());
        Tensor dq = ops::matmul(dlogits, k_[h]);
        Tensor dk = ops::matmul(transpose(dlogits), q_[h]);

        // Projections: q = x wq + bq etc.
        for (std::size_t i = 0; i < n; ++i) {
            kt.add(head.dbq.data(), dq.data() + i * d_head_, d_head_);
            kt.add(head.dbk.data(), dk.data() + i * d_head_, d_head_);
            kt.add(head.dbv.data(), dv.data() + i * d_head_, d_head_);
        }
        ops::matmul_backward(x_cache_, head.wq, dq, dx, head.dwq);
        ops::matmul_backward(x_cache_, head.wk, dk, dx, head.dwk);
        ops::matmul_backward(x_cache_, head.wv, dv, dx, head.dwv);
    }
    return dx;
}

void MultiHeadAttention::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    for (std::size_t h = 0; h < heads_.size(); ++h) {
        Head& head = heads_[h];
        const std::string hp = prefix + "h" + std::to_string(h) + ".";
        out.push_back({hp + "wq", &head.wq, &head.dwq});
        out.push_back({hp + "bq", &head.bq, &head.dbq});
        out.push_back({hp + "wk", &head.wk, &head.dwk});
        out.push_back({hp + "bk", &head.bk, &head.dbk});
        out.push_back({hp + "wv", &head.wv, &head.dwv});
        out.push_back({hp + "bv", &head.bv, &head.dbv});
    }
    out.push_back({prefix + "wo", &wo, &dwo});
    out.push_back({prefix + "bo", &bo, &dbo});
}

// ---------------------------------------------------------------- Block

TransformerBlock::TransformerBlock(std::size_t d_model, std::size_t heads, std::size_t ffn_dim,
                                   double dropout_rate, RngStream init_rng,
                                   RngStream dropout_stream)
    : ln1(d_model),
      ln2(d_model),
      attention(d_model, heads, init_rng.fork(0)),
      ffn1(d_model, ffn_dim),
      ffn2(ffn_dim, d_model),
      drop_attn(dropout_rate, dropout_stream.fork(0)),
      drop_ffn(dropout_rate, dropout_stream.fork(1)) {
    ffn1.init(init_rng.fork(1));
    ffn2.init(init_rng.fork(2));
}

Tensor TransformerBlock::forward(const Tensor& x, Mode mode) {
    const auto& kt = kernels::active();
    Tensor h = ln1.forward(x, mode);
    Tensor a = attention.forward(h, mode);
    Tensor x1 = x;
    {
        const Tensor dropped = drop_attn.forward(a, mode);
        kt.add(x1.data(), dropped.data(), x1.size());
    }
    Tensor h2 = ln2.forward(x1, mode);
    Tensor f = ffn2.forward(ffn_relu.forward(ffn1.forward(h2, mode), mode), mode);
    Tensor out = x1;
    {
        const Tensor dropped = drop_ffn.forward(f, mode);
        kt.add(out.data(), dropped.data(), out.size());
    }
    has_cache_ = true;
    return out;
}

Tensor TransformerBlock::backward(const Tensor& dy) {
    require_cache(has_cache_, "TransformerBlock");
    has_cache_ = false;
    const auto& kt = kernels::active();
    // out = x1 + drop_ffn(ffn(ln2(x1)))
    Tensor dx1 = dy;
    {
        const Tensor df = drop_ffn.backward(dy);
        const Tensor dh2 = ffn1.backward(ffn_relu.backward(ffn2.backward(df)));
        const Tensor dx1_ffn = ln2.backward(dh2);
        kt.add(dx1.data(), dx1_ffn.data(), dx1.size());
    }
    // x1 = x + drop_attn(attention(ln1(x)))
    Tensor dx = dx1;
    {
        const Tensor da = drop_attn.backward(dx1);
        const Tensor dh = attention.backward(da);
        const Tensor dx_attn = ln1.backward(dh);
        kt.add(dx.data(), dx_attn.data(), dx.size());
    }
    return dx;
}

void TransformerBlock::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    ln1.collect_params(out, prefix + "ln1.");
    attention.collect_params(out, prefix + "attn.");
    ln2.collect_params(out, prefix + "ln2.");
    ffn1.collect_params(out, prefix + "ffn1.");
    ffn2.collect_params(out, prefix + "ffn2.");
}

void TransformerBlock::begin_probe() {
    drop_attn.begin_probe();
    drop_ffn.begin_probe();
}

// -------------------------------------------------------------- Encoder

Encoder::Encoder(std::size_t blocks, std::size_t d_model, std::size_t heads,
                 std::size_t ffn_dim, double dropout_rate, RngStream init_rng,
                 RngStream dropout_rng) {
    blocks_.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        blocks_.emplace_back(d_model, heads, ffn_dim, dropout_rate, init_rng.fork(b),
                             dropout_rng.fork(b));
    }
}

Tensor Encoder::forward(const Tensor& x, Mode mode) {
    Tensor h = x;
    for (TransformerBlock& block : blocks_) {
        h = block.forward(h, mode);
    }
    return h;
}

Tensor Encoder::backward(const Tensor& dy) {
    Tensor d = dy;
    for (std::size_t b = blocks_.size(); b-- > 0;) {
        d = blocks_[b].backward(d);
    }
    return d;
}

void Encoder::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        blocks_[b].collect_params(out, prefix + "block" + std::to_string(b) + ".");
    }
}

void Encoder::begin_probe() {
    for (TransformerBlock& block : blocks_) block.begin_probe();
}

// ------------------------------------------------------------------ Head

RegressionHead::RegressionHead(std::size_t width, double dropout_rate, RngStream init_rng,
                               RngStream dropout_stream)
    : dropout(dropout_rate, dropout_stream), dense(width, 1) {
    dense.init(init_rng);
}

Tensor RegressionHead::forward(const Tensor& v, Mode mode) {
    has_cache_ = true;
    return dense.forward(dropout.forward(v, mode), mode);
}

Tensor RegressionHead::backward(const Tensor& dy) {
    require_cache(has_cache_, "RegressionHead");
    has_cache_ = false;
    return dropout.backward(dense.backward(dy));
}

void RegressionHead::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    dense.collect_params(out, prefix);
}

void RegressionHead::begin_probe() {
    dropout.begin_probe();
}

} // namespace sit
