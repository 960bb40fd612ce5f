#include "sit/model.hpp"

#include "sit/error.hpp"

namespace sit {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kBaseline: return "baseline";
        case Variant::kNoTransformer: return "no-transformer";
        case Variant::kNoGmp: return "no-gmp";
        case Variant::kFull: return "full";
    }
    return "full";
}

Variant variant_from_name(const std::string& name) {
    if (name == "baseline") return Variant::kBaseline;
    if (name == "no-transformer") return Variant::kNoTransformer;
    if (name == "no-gmp") return Variant::kNoGmp;
    if (name == "full") return Variant::kFull;
    throw ConfigParseError("unknown variant: " + name +
                           " (expected baseline|no-transformer|no-gmp|full)");
}

namespace {

std::size_t head_width(Variant variant, const ModelConfig& cfg) {
    switch (variant) {
        case Variant::kBaseline: return cfg.backbone_channels;
        case Variant::kNoTransformer: return 3 * 2 * kBranchChannels;
        case Variant::kNoGmp:
        case Variant::kFull: return cfg.d_proj;
    }
    return cfg.d_proj;
}

} // namespace

SITModel::SITModel(Variant variant, const ModelConfig& cfg, std::uint64_t seed)
    : variant_(variant), cfg_(cfg), head_(head_width(variant, cfg), 1) {
    RngStream root(seed);
    RngStream init = root.fork(0);
    RngStream drops = root.fork(1);
    const bool interacting = variant == Variant::kNoGmp || variant == Variant::kFull;
    if (variant != Variant::kBaseline) {
        pyramid_.emplace(cfg.backbone_channels, /*use_gmp=*/variant != Variant::kNoGmp,
                         init.fork(1));
    } else {
        base_gap_.emplace();
    }
    if (interacting) {
        projection_.emplace(pyramid_->row_width(), cfg.d_proj);
        projection_->init(init.fork(2));
        encoder_.emplace(cfg.blocks, cfg.d_proj, cfg.heads, cfg.ffn_dim, cfg.dropout,
                         init.fork(3), drops.fork(0));
        seq_pool_.emplace();
        head_dropout_.emplace(cfg.dropout, drops.fork(1));
    }
    head_.init(init.fork(4));
}

double SITModel::forward(const Tensor& fbase, Mode mode) {
    if (fbase.rank() != 3 || fbase.extent(2) != cfg_.backbone_channels) {
        throw ShapeMismatch("model expects H x W x " + std::to_string(cfg_.backbone_channels) +
                            " features, got " + fbase.shape_str());
    }
    entry_ = Entry::kFeatures;
    Tensor v;
    switch (variant_) {
        case Variant::kBaseline:
            v = base_gap_->forward(fbase, mode);
            break;
        case Variant::kNoTransformer: {
            Tensor seq = pyramid_->forward(fbase);
            v = Tensor({seq.size()}, std::vector<double>(seq.data(), seq.data() + seq.size()));
            break;
        }
        case Variant::kNoGmp:
        case Variant::kFull: {
            const Tensor seq = pyramid_->forward(fbase);
            has_cache_ = true;
            return forward_tail(seq, mode);
        }
    }
    has_cache_ = true;
    const Tensor y = head_.forward(v, mode);
    return y[0];
}

double SITModel::forward_from_sequence(const Tensor& seq, Mode mode) {
    if (variant_ != Variant::kNoGmp && variant_ != Variant::kFull) {
        throw Error("forward_from_sequence requires an interaction variant");
    }
    entry_ = Entry::kSequence;
    has_cache_ = true;
    return forward_tail(seq, mode);
}

double SITModel::forward_tail(const Tensor& seq, Mode mode) {
    const Tensor proj = projection_->forward(seq, mode);
    const Tensor trans = encoder_->forward(proj, mode);
    const Tensor v = seq_pool_->forward(trans, mode);
    const Tensor dropped = head_dropout_->forward(v, mode);
    const Tensor y = head_.forward(dropped, mode);
    return y[0];
}

Tensor SITModel::backward(double dy) {
    if (!has_cache_) {
        throw Error("SITModel: backward called without a matching forward");
    }
    has_cache_ = false;
    const Tensor dyt({1}, {dy});
    switch (variant_) {
        case Variant::kBaseline:
            return base_gap_->backward(head_.backward(dyt));
        case Variant::kNoTransformer: {
            const Tensor dflat = head_.backward(dyt);
            const Tensor dseq({3, 2 * kBranchChannels},
                              std::vector<double>(dflat.data(), dflat.data() + dflat.size()));
            return pyramid_->backward(dseq);
        }
        case Variant::kNoGmp:
        case Variant::kFull: {
            const Tensor dv = head_dropout_->backward(head_.backward(dyt));
            const Tensor dtrans = seq_pool_->backward(dv);
            const Tensor dproj = encoder_->backward(dtrans);
            const Tensor dseq = projection_->backward(dproj);
            if (entry_ == Entry::kSequence) return dseq;
            return pyramid_->backward(dseq);
        }
    }
    throw Error("unreachable variant");
}

std::vector<ParamView> SITModel::params() {
    std::vector<ParamView> out;
    if (pyramid_) pyramid_->collect_params(out, "");
    if (projection_) projection_->collect_params(out, "proj.");
    if (encoder_) encoder_->collect_params(out, "");
    head_.collect_params(out, "head.");
    return out;
}

void SITModel::zero_grad() {
    for (ParamView& p : params()) p.grad->zero();
}

void SITModel::begin_probe() {
    if (encoder_) encoder_->begin_probe();
    if (head_dropout_) head_dropout_->begin_probe();
}

SITModel build_variant(Variant variant, const ModelConfig& cfg, std::uint64_t seed) {
    if (variant == Variant::kNoGmp || variant == Variant::kFull) {
        if (cfg.heads == 0 || cfg.d_proj % cfg.heads != 0) {
            throw ConfigParseError("heads must divide d_proj exactly");
        }
    }
    return SITModel(variant, cfg, seed);
}

double sit_forward(const FeatureMap& features, SITModel& model, Mode mode) {
    return model.forward(features.data, mode);
}

double sit_forward(const ImageTensor& image, SyntheticBackbone& backbone, SITModel& model,
                   Mode mode) {
    return model.forward(backbone.forward(image).data, mode);
}

} // namespace sit
