#include "sit/pyramid.hpp"

#include <cstring>

#include "sit/error.hpp"
#include "sit/kernels.hpp"

namespace sit {

Tensor branch_forward(const Tensor& fbase, Conv2dLayer& conv, ReluLayer& relu) {
    return relu.forward(conv.forward(fbase, Mode::kEval), Mode::kEval);
}

Tensor pool_and_concat(const Tensor& branch_out) {
    const Tensor gap = ops::global_avg_pool_hw(branch_out);
    const Tensor gmp = ops::global_max_pool_hw(branch_out);
    const std::size_t c = gap.extent(0);
    Tensor row({2 * c});
    std::memcpy(row.data(), gap.data(), c * sizeof(double));
    std::memcpy(row.data() + c, gmp.data(), c * sizeof(double));
    return row;
}

ScalePyramid::ScalePyramid(std::size_t c_in, bool use_gmp, RngStream init_rng)
    : use_gmp_(use_gmp) {
    convs_.reserve(3);
    for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t k = kBranchKernels[i];
        convs_.emplace_back(k, c_in, kBranchChannels, /*stride=*/1, /*pad=*/(k - 1) / 2);
        convs_.back().init(init_rng.fork(i));
    }
    relus_.resize(3);
    gaps_.resize(3);
    gmps_.resize(3);
}

Tensor ScalePyramid::forward(const Tensor& fbase) {
    if (fbase.rank() != 3) {
        throw ShapeMismatch("scale pyramid expects H x W x C input, got " + fbase.shape_str());
    }
    fh_ = fbase.extent(0);
    fw_ = fbase.extent(1);
    fc_ = fbase.extent(2);
    has_cache_ = true;
    const std::size_t width = row_width();
    Tensor seq({3, width});
    for (std::size_t i = 0; i < 3; ++i) {
        const Tensor fi = relus_[i].forward(convs_[i].forward(fbase, Mode::kEval), Mode::kEval);
        const Tensor gap = gaps_[i].forward(fi, Mode::kEval);
        std::memcpy(seq.data() + i * width, gap.data(), kBranchChannels * sizeof(double));
        if (use_gmp_) {
            const Tensor gmp = gmps_[i].forward(fi, Mode::kEval);
            std::memcpy(seq.data() + i * width + kBranchChannels, gmp.data(),
                        kBranchChannels * sizeof(double));
        }
    }
    return seq;
}

Tensor ScalePyramid::backward(const Tensor& dseq) {
    if (!has_cache_) {
        throw Error("ScalePyramid: backward called without a matching forward");
    }
    has_cache_ = false;
    const std::size_t width = row_width();
    if (dseq.rank() != 2 || dseq.extent(0) != 3 || dseq.extent(1) != width) {
        throw ShapeMismatch("scale pyramid upstream must be 3x" + std::to_string(width) +
                            ", got " + dseq.shape_str());
    }
    Tensor dfbase({fh_, fw_, fc_});
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor dgap({kBranchChannels},
                    std::vector<double>(dseq.data() + i * width,
                                        dseq.data() + i * width + kBranchChannels));
        Tensor dfi = gaps_[i].backward(dgap);
        if (use_gmp_) {
            Tensor dgmp({kBranchChannels},
                        std::vector<double>(dseq.data() + i * width + kBranchChannels,
                                            dseq.data() + (i + 1) * width));
            const Tensor dfi_max = gmps_[i].backward(dgmp);
            kt.add(dfi.data(), dfi_max.data(), dfi.size());
        }
        const Tensor dbranch = convs_[i].backward(relus_[i].backward(dfi));
        kt.add(dfbase.data(), dbranch.data(), dfbase.size());
    }
    return dfbase;
}

void ScalePyramid::collect_params(std::vector<ParamView>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < 3; ++i) {
        convs_[i].collect_params(out, prefix + "branch" + std::to_string(kBranchKernels[i]) + ".");
    }
}

Tensor build_scale_sequence(const Tensor& fbase, ScalePyramid& pyramid) {
    return pyramid.forward(fbase);
}

} // namespace sit
