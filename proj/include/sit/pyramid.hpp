#pragma once

#include <array>

#include "sit/backbone.hpp"
#include "sit/layers.hpp"

namespace sit {

// One scale branch: ReLU(conv_same(F_base)) at kernel size k in {1, 3, 5},
// always 64 output channels.
inline constexpr std::size_t kBranchChannels = 64;
inline constexpr std::array<std::size_t, 3> kBranchKernels = {1, 3, 5};

Tensor branch_forward(const Tensor& fbase, Conv2dLayer& conv, ReluLayer& relu);

// GAP in entries [0, 64), GMP in entries [64, 128).
Tensor pool_and_concat(const Tensor& branch_out);

// Multi-scale extraction: three parallel conv branches, dual (or GAP-only)
// pooling, rows stacked fine-to-coarse (k = 1, 3, 5).
class ScalePyramid {
public:
    ScalePyramid(std::size_t c_in, bool use_gmp, RngStream init_rng);

    // F_base (H x W x C_in) -> scale sequence (3 x row_width()).
    Tensor forward(const Tensor& fbase);
    // dS (3 x row_width()) -> dF_base; accumulates branch parameter grads.
    Tensor backward(const Tensor& dseq);

    void collect_params(std::vector<ParamView>& out, const std::string& prefix);

    std::size_t row_width() const { return use_gmp_ ? 2 * kBranchChannels : kBranchChannels; }
    bool use_gmp() const { return use_gmp_; }
    Conv2dLayer& branch(std::size_t i) { return convs_[i]; }

private:
    bool use_gmp_;
    std::vector<Conv2dLayer> convs_;
    std::vector<ReluLayer> relus_;
    std::vector<GlobalAvgPoolLayer> gaps_;
    std::vector<GlobalMaxPoolLayer> gmps_;
    std::size_t fh_ = 0, fw_ = 0, fc_ = 0;
    bool has_cache_ = false;
};

// Stacks the three pooled branch vectors into the scale sequence.
Tensor build_scale_sequence(const Tensor& fbase, ScalePyramid& pyramid);

} // namespace sit
