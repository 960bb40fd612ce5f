#pragma once

#include "sit/defs.hpp"
#include "sit/rng.hpp"
#include "sit/tensor.hpp"

namespace sit::ops {

// Sum accumulated in ascending value order, so the result depends only on
// the multiset of terms. Used wherever a reduction runs across the scale
// sequence and bitwise permutation invariance is part of the contract.
double sum_order_invariant(const double* x, std::size_t n);

// C = A (m x k) * B (k x n). Throws ShapeMismatch when inner extents differ.
Tensor matmul(const Tensor& a, const Tensor& b);

// Accumulates dA += dC * B^T and dB += A^T * dC.
void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dc, Tensor& da, Tensor& db);

// 2-D convolution over an H x W x Cin input with a k x k x Cin x Cout kernel
// and a Cout bias, zero padding `pad` on each spatial side.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t pad);

// Stride-1 "same" convolution: odd k, pad (k-1)/2, output spatial extents
// equal the input's. Throws InvalidKernel on even k.
Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// dx may be null when the input gradient is not needed; dk and db accumulate.
void conv2d_backward(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t pad,
                     const Tensor& dy, Tensor* dx, Tensor& dk, Tensor& db);

Tensor relu(const Tensor& x);
// Subgradient at 0 is 0: upstream passes only where x > 0.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// Row-wise softmax with max subtraction; rows sum to 1 within 1e-12.
Tensor softmax_rows(const Tensor& x);
// y is the softmax output; computes the full Jacobian-vector product.
Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy);

// Per-row (x - mean) / sqrt(var + eps) * gamma + beta with population
// (biased) variance over the row.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
void layer_norm_backward(const Tensor& x, const Tensor& gamma, double eps, const Tensor& dy,
                         Tensor& dx, Tensor& dgamma, Tensor& dbeta);

// H x W x C -> C.
Tensor global_avg_pool_hw(const Tensor& x);
Tensor global_avg_pool_hw_backward(std::size_t h, std::size_t w, const Tensor& dy);
Tensor global_max_pool_hw(const Tensor& x);
// Routes each channel's gradient to the first maximal location in row-major
// (h, w) scan order.
Tensor global_max_pool_hw_backward(const Tensor& x, const Tensor& pooled, const Tensor& dy);

// Inverted dropout: Train mode zeroes elements with probability `rate` and
// scales survivors by 1/(1-rate); Eval returns x unchanged. When mask_out is
// non-null the applied mask (0 or 1/(1-rate) per element) is stored for the
// backward pass. rate == 0 consumes no draws.
Tensor dropout(const Tensor& x, double rate, Mode mode, RngStream& rng, Tensor* mask_out = nullptr);

} // namespace sit::ops
