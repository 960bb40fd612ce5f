#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sit/layers.hpp"
#include "sit/rng.hpp"
#include "sit/tensor.hpp"

namespace sit {

// Normalized input image: 224 x 224 x 3 with values in [0, 1].
struct ImageTensor {
    Tensor data;
};

inline constexpr std::size_t kImageSide = 224;

// Raw bytes (row-major h, w, c) divided by 255.0. Throws BadDimensions
// unless the extents are exactly 224 x 224 x 3.
ImageTensor normalize_image(const std::vector<std::uint8_t>& raw, std::size_t h, std::size_t w);

enum class Provenance { kSynthetic, kPrecomputed };

// Backbone output: H_b x W_b x C_b feature map.
struct FeatureMap {
    Tensor data;
    Provenance provenance = Provenance::kSynthetic;
};

struct FeatureShape {
    std::size_t h = 7, w = 7, c = 1280;
    bool operator==(const FeatureShape&) const = default;
};

// Stand-in for the pretrained backbone: five stride-2 3x3 conv + ReLU stages
// mapping 224 x 224 x 3 down to 7 x 7 x C_b. Deterministic given the seed.
class SyntheticBackbone {
public:
    SyntheticBackbone(std::size_t c_b, std::uint64_t seed, bool trainable = true);

    FeatureMap forward(const ImageTensor& img);
    // Propagates the feature-map gradient; accumulates parameter gradients
    // only when the backbone is trainable.
    void backward(const Tensor& dfeatures);

    std::vector<ParamView> params();
    void zero_grad();

    FeatureShape output_shape() const { return {7, 7, c_b_}; }
    bool trainable() const { return trainable_; }

private:
    std::size_t c_b_;
    bool trainable_;
    std::vector<Conv2dLayer> convs_;
    std::vector<ReluLayer> relus_;
};

// Loads SITF files and validates them against a configured output shape.
class PrecomputedLoader {
public:
    explicit PrecomputedLoader(FeatureShape expected) : expected_(expected) {}

    FeatureMap load(const std::string& path) const;
    FeatureShape output_shape() const { return expected_; }

private:
    FeatureShape expected_;
};

} // namespace sit
