#include "sit/backbone.hpp"

#include "sit/error.hpp"
#include "sit/sitf.hpp"

namespace sit {

ImageTensor normalize_image(const std::vector<std::uint8_t>& raw, std::size_t h, std::size_t w) {
    if (h != kImageSide || w != kImageSide) {
        throw BadDimensions("image must be 224x224, got " + std::to_string(h) + "x" +
                            std::to_string(w));
    }
    if (raw.size() != h * w * 3) {
        throw BadDimensions("image byte count " + std::to_string(raw.size()) + ", expected " +
                            std::to_string(h * w * 3));
    }
    Tensor t({h, w, 3});
    for (std::size_t i = 0; i < raw.size(); ++i) {
        t[i] = static_cast<double>(raw[i]) / 255.0;
    }
    return ImageTensor{std::move(t)};
}

SyntheticBackbone::SyntheticBackbone(std::size_t c_b, std::uint64_t seed, bool trainable)
    : c_b_(c_b), trainable_(trainable) {
    // 224 -> 112 -> 56 -> 28 -> 14 -> 7, widening toward C_b.
    const std::size_t widths[6] = {3, 16, 32, 32, 64, c_b};
    RngStream rng(seed);
    convs_.reserve(5);
    for (std::size_t s = 0; s < 5; ++s) {
        convs_.emplace_back(3, widths[s], widths[s + 1], /*stride=*/2, /*pad=*/1);
        convs_.back().init(rng.fork(s));
    }
    convs_.front().set_wants_input_grad(false);  // image gradient is never consumed
    relus_.resize(5);
}

FeatureMap SyntheticBackbone::forward(const ImageTensor& img) {
    if (img.data.rank() != 3 || img.data.extent(0) != kImageSide ||
        img.data.extent(1) != kImageSide || img.data.extent(2) != 3) {
        throw BadDimensions("backbone expects 224x224x3 input, got " + img.data.shape_str());
    }
    Tensor x = img.data;
    for (std::size_t s = 0; s < convs_.size(); ++s) {
        x = relus_[s].forward(convs_[s].forward(x, Mode::kEval), Mode::kEval);
    }
    return FeatureMap{std::move(x), Provenance::kSynthetic};
}

void SyntheticBackbone::backward(const Tensor& dfeatures) {
    if (!trainable_) return;
    Tensor d = dfeatures;
    for (std::size_t s = convs_.size(); s-- > 0;) {
        d = convs_[s].backward(relus_[s].backward(d));
    }
}

std::vector<ParamView> SyntheticBackbone::params() {
    std::vector<ParamView> out;
    for (std::size_t s = 0; s < convs_.size(); ++s) {
        convs_[s].collect_params(out, "backbone.stage" + std::to_string(s) + ".");
    }
    return out;
}

void SyntheticBackbone::zero_grad() {
    for (ParamView& p : params()) p.grad->zero();
}

FeatureMap PrecomputedLoader::load(const std::string& path) const {
    return load_feature_map(path, expected_);
}

} // namespace sit
