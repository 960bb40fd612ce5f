#pragma once

#include <memory>
#include <optional>
#include <string>

#include "sit/backbone.hpp"
#include "sit/pyramid.hpp"
#include "sit/transformer.hpp"

namespace sit {

enum class Variant { kBaseline, kNoTransformer, kNoGmp, kFull };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws ConfigParseError

// Architecture knobs shared by model construction and training.
struct ModelConfig {
    std::size_t backbone_channels = 1280;  // C_b
    std::size_t d_proj = 128;
    std::size_t blocks = 2;
    std::size_t heads = 4;
    std::size_t ffn_dim = 512;
    double dropout = 0.1;
};

// The trainable graph downstream of the base feature map. The computation
// per variant:
//   Baseline       : GAP(F_base) -> dense -> scalar
//   NoTransformer  : pyramid (GAP+GMP) -> flatten 3x128 -> dense -> scalar
//   NoGmp          : pyramid (GAP only, rows of 64) -> proj -> encoder
//                    -> sequence mean -> dropout -> dense -> scalar
//   Full           : pyramid (GAP+GMP, rows of 128) -> proj -> encoder
//                    -> sequence mean -> dropout -> dense -> scalar
class SITModel {
public:
    SITModel(Variant variant, const ModelConfig& cfg, std::uint64_t seed);

    double forward(const Tensor& fbase, Mode mode);
    // dy is dL/dyhat; accumulates parameter gradients, returns dL/dF_base.
    Tensor backward(double dy);

    // Projection -> encoder -> pool -> head, starting from a scale sequence.
    // Only valid for the NoGmp/Full variants; lets tests probe the
    // interaction stage in isolation.
    double forward_from_sequence(const Tensor& seq, Mode mode);

    std::vector<ParamView> params();
    void zero_grad();
    void begin_probe();

    Variant variant() const { return variant_; }
    const ModelConfig& config() const { return cfg_; }

    ScalePyramid* pyramid() { return pyramid_ ? &*pyramid_ : nullptr; }
    DenseLayer* projection() { return projection_ ? &*projection_ : nullptr; }
    Encoder* encoder() { return encoder_ ? &*encoder_ : nullptr; }

private:
    double forward_tail(const Tensor& seq, Mode mode);

    Variant variant_;
    ModelConfig cfg_;
    std::optional<ScalePyramid> pyramid_;
    std::optional<GlobalAvgPoolLayer> base_gap_;       // Baseline
    std::optional<DenseLayer> projection_;             // NoGmp / Full
    std::optional<Encoder> encoder_;                   // NoGmp / Full
    std::optional<SequencePoolLayer> seq_pool_;        // NoGmp / Full
    std::optional<DropoutLayer> head_dropout_;         // NoGmp / Full
    DenseLayer head_;

    enum class Entry { kFeatures, kSequence } entry_ = Entry::kFeatures;
    bool has_cache_ = false;
};

// Builds the variant's graph at the configured architecture; parameters
// drawn from the seed.
SITModel build_variant(Variant variant, const ModelConfig& cfg, std::uint64_t seed);

// Full pipeline entry points.
double sit_forward(const FeatureMap& features, SITModel& model, Mode mode);
double sit_forward(const ImageTensor& image, SyntheticBackbone& backbone, SITModel& model,
                   Mode mode);

} // namespace sit
