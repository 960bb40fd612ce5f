#include <doctest.h>

#include <cstring>
#include <set>

#include "sit/error.hpp"
#include "sit/gradcheck.hpp"
#include "sit/kernels.hpp"
#include "sit/model.hpp"
#include "support.hpp"

using namespace sit;
using testsupport::random_tensor;

namespace {

ModelConfig small_config(std::size_t c_b) {
    ModelConfig cfg;
    cfg.backbone_channels = c_b;
    return cfg;
}

} // namespace

TEST_CASE("variant names round-trip") {
    for (Variant v : {Variant::kBaseline, Variant::kNoTransformer, Variant::kNoGmp,
                      Variant::kFull}) {
        CHECK(variant_from_name(variant_name(v)) == v);
    }
    CHECK_THROWS_AS(variant_from_name("resnet"), ConfigParseError);
}

TEST_CASE("variant parameter-set audits") {
    const ModelConfig cfg = small_config(16);

    SITModel baseline = build_variant(Variant::kBaseline, cfg, 1);
    std::set<std::string> base_names;
    for (const ParamView& p : baseline.params()) base_names.insert(p.name);
    CHECK(base_names == std::set<std::string>{"head.weight", "head.bias"});
    // No attention or branch-conv parameters anywhere.
    for (const std::string& n : base_names) {
        CHECK(n.find("attn") == std::string::npos);
        CHECK(n.find("branch") == std::string::npos);
    }

    SITModel no_tr = build_variant(Variant::kNoTransformer, cfg, 1);
    std::set<std::string> nt_names;
    for (const ParamView& p : no_tr.params()) nt_names.insert(p.name);
    CHECK(nt_names.count("branch1.kernel") == 1);
    CHECK(nt_names.count("branch3.kernel") == 1);
    CHECK(nt_names.count("branch5.kernel") == 1);
    for (const std::string& n : nt_names) {
        CHECK(n.find("attn") == std::string::npos);
        CHECK(n.find("proj") == std::string::npos);
    }

    SITModel no_gmp = build_variant(Variant::kNoGmp, cfg, 1);
    bool saw_proj = false;
    for (const ParamView& p : no_gmp.params()) {
        if (p.name == "proj.weight") {
            saw_proj = true;
            CHECK(p.value->extent(0) == 64);  // GAP-only rows
            CHECK(p.value->extent(1) == 128);
        }
    }
    CHECK(saw_proj);
    REQUIRE(no_gmp.pyramid());
    CHECK(no_gmp.pyramid()->row_width() == 64);

    SITModel full = build_variant(Variant::kFull, cfg, 1);
    std::set<std::string> full_names;
    for (const ParamView& p : full.params()) full_names.insert(p.name);
    CHECK(full_names.count("proj.weight") == 1);
    CHECK(full_names.count("block0.attn.h0.wq") == 1);
    CHECK(full_names.count("block1.ffn2.weight") == 1);
    CHECK(full_names.count("head.weight") == 1);
}

TEST_CASE("architecture shapes at published defaults") {
    // C_b = 1280: branch outputs 7x7x64, S 3x128, S_proj 3x128, v width 128.
    ModelConfig cfg;  // defaults
    SITModel full = build_variant(Variant::kFull, cfg, 3);
    RngStream rng(131);
    const Tensor fbase = random_tensor({7, 7, 1280}, rng, 0.0, 1.0);

    REQUIRE(full.pyramid());
    Conv2dLayer& conv1 = full.pyramid()->branch(0);
    ReluLayer relu;
    const Tensor f1 = branch_forward(fbase, conv1, relu);
    CHECK(f1.extent(0) == 7);
    CHECK(f1.extent(1) == 7);
    CHECK(f1.extent(2) == 64);

    const Tensor seq = full.pyramid()->forward(fbase);
    CHECK(seq.extent(0) == 3);
    CHECK(seq.extent(1) == 128);

    const Tensor proj = full.projection()->forward(seq, Mode::kEval);
    CHECK(proj.extent(0) == 3);
    CHECK(proj.extent(1) == 128);

    const double yhat = full.forward(fbase, Mode::kEval);
    CHECK(std::isfinite(yhat));
}

TEST_CASE("projection identity and zero-input cases") {
    const ModelConfig cfg = small_config(8);
    SITModel full = build_variant(Variant::kFull, cfg, 5);
    DenseLayer* proj = full.projection();
    REQUIRE(proj);

    proj->weight.zero();
    for (std::size_t i = 0; i < 128; ++i) proj->weight.at(i, i) = 1.0;
    proj->bias.zero();
    RngStream rng(132);
    const Tensor s = random_tensor({3, 128}, rng);
    const Tensor out = proj->forward(s, Mode::kEval);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(out[i] == s[i]);

    RngStream brng(133);
    for (std::size_t j = 0; j < 128; ++j) proj->bias[j] = brng.next_uniform(-1, 1);
    const Tensor zed = proj->forward(Tensor({3, 128}), Mode::kEval);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 128; ++j) {
            CHECK(zed.at(i, j) == doctest::Approx(proj->bias[j]));
        }
    }
}

TEST_CASE("eval determinism and scale-order invariance of the full model") {
    const ModelConfig cfg = small_config(8);
    SITModel full = build_variant(Variant::kFull, cfg, 7);
    RngStream rng(134);
    const Tensor fbase = random_tensor({7, 7, 8}, rng, 0.0, 1.0);

    const double y1 = full.forward(fbase, Mode::kEval);
    const double y2 = full.forward(fbase, Mode::kEval);
    CHECK(std::memcmp(&y1, &y2, sizeof(double)) == 0);

    // Permuting the rows of S before projection leaves yhat bit-identical.
    const Tensor seq = full.pyramid()->forward(fbase);
    const double base = full.forward_from_sequence(seq, Mode::kEval);
    const std::size_t perms[5][3] = {
        {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& perm : perms) {
        Tensor shuffled({3, 128});
        for (std::size_t i = 0; i < 3; ++i) {
            std::memcpy(shuffled.data() + i * 128, seq.data() + perm[i] * 128,
                        128 * sizeof(double));
        }
        const double swapped = full.forward_from_sequence(shuffled, Mode::kEval);
        CHECK(std::memcmp(&swapped, &base, sizeof(double)) == 0);
    }
}

TEST_CASE("attention weight rows sum to one at every head and block") {
    const ModelConfig cfg = small_config(8);
    SITModel full = build_variant(Variant::kFull, cfg, 9);
    RngStream rng(135);
    (void)full.forward(random_tensor({7, 7, 8}, rng, 0.0, 1.0), Mode::kEval);
    REQUIRE(full.encoder());
    for (TransformerBlock& block : full.encoder()->blocks()) {
        for (const Tensor& w : block.attention.last_attention_weights()) {
            for (std::size_t i = 0; i < w.extent(0); ++i) {
                const double s =
                    kernels::active().sum(w.data() + i * w.extent(1), w.extent(1));
                CHECK(std::abs(s - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("no-transformer predictions ignore attention-style parameters") {
    // The variant has no attention subgraph at all; its prediction is a pure
    // function of branches + head.
    const ModelConfig cfg = small_config(8);
    SITModel no_tr = build_variant(Variant::kNoTransformer, cfg, 11);
    RngStream rng(136);
    const Tensor fbase = random_tensor({7, 7, 8}, rng, 0.0, 1.0);
    const double y = no_tr.forward(fbase, Mode::kEval);
    for (const ParamView& p : no_tr.params()) {
        CHECK(p.name.find("attn") == std::string::npos);
    }
    CHECK(std::isfinite(y));
    CHECK(no_tr.params().size() == 8);  // 3 x (kernel, bias) + head (weight, bias)
}

TEST_CASE("full-model gradient check at reduced width") {
    const ModelConfig cfg = small_config(4);
    SITModel full = build_variant(Variant::kFull, cfg, 13);
    RngStream rng(137);
    Tensor fbase({7, 7, 4});
    for (std::size_t i = 0; i < fbase.size(); ++i) {
        fbase[i] = rng.next_uniform(0.0, 1.0) + 1e-4 * static_cast<double>(i % 101);
    }

    Tensor dfbase;
    ScalarProbe probe;
    probe.forward = [&]() {
        full.begin_probe();
        return full.forward(fbase, Mode::kEval);
    };
    probe.backward = [&]() {
        full.begin_probe();
        (void)full.forward(fbase, Mode::kEval);
        dfbase = full.backward(1.0);
    };
    probe.coords = full.params();
    for (ParamView& p : probe.coords) p.grad->zero();
    probe.coords.push_back({"input", &fbase, &dfbase});

    // Probe step 1e-7: the branch ReLU and max-pool kinks bias a wider
    // secant, while the analytic path is exact (see the per-op checks).
    const GradCheckReport report = grad_check_scalar(probe, 1e-4, 1e-7, 24);
    CHECK(report.pass);
    CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("all variants backpropagate through their graphs") {
    RngStream rng(138);
    for (Variant v : {Variant::kBaseline, Variant::kNoTransformer, Variant::kNoGmp,
                      Variant::kFull}) {
        SITModel model = build_variant(v, small_config(4), 17);
        Tensor fbase = random_tensor({7, 7, 4}, rng, 0.0, 1.0);

        Tensor dfbase;
        ScalarProbe probe;
        probe.forward = [&]() {
            model.begin_probe();
            return model.forward(fbase, Mode::kEval);
        };
        probe.backward = [&]() {
            model.begin_probe();
            (void)model.forward(fbase, Mode::kEval);
            dfbase = model.backward(1.0);
        };
        probe.coords = model.params();
        for (ParamView& p : probe.coords) p.grad->zero();
        probe.coords.push_back({"input", &fbase, &dfbase});
        const GradCheckReport report = grad_check_scalar(probe, 1e-4, 1e-7, 8);
        CHECK(report.pass);
    }
}

TEST_CASE("image pipeline: backbone feeds the model end to end") {
    const ModelConfig cfg = small_config(8);
    SITModel full = build_variant(Variant::kFull, cfg, 23);
    SyntheticBackbone backbone(8, 23);

    std::vector<std::uint8_t> raw(224 * 224 * 3);
    RngStream rng(139);
    for (auto& b : raw) b = static_cast<std::uint8_t>(rng.next_u64() % 256);
    const ImageTensor img = normalize_image(raw, 224, 224);

    const double y1 = sit_forward(img, backbone, full, Mode::kEval);
    const double y2 = sit_forward(img, backbone, full, Mode::kEval);
    CHECK(std::isfinite(y1));
    CHECK(std::memcmp(&y1, &y2, sizeof(double)) == 0);

    // Feature-map entry point agrees with the composed pipeline.
    const FeatureMap f = backbone.forward(img);
    const double y3 = sit_forward(f, full, Mode::kEval);
    CHECK(std::memcmp(&y1, &y3, sizeof(double)) == 0);
}

TEST_CASE("model shape validation") {
    SITModel full = build_variant(Variant::kFull, small_config(8), 19);
    CHECK_THROWS_AS(full.forward(Tensor({7, 7, 16}), Mode::kEval), ShapeMismatch);
    CHECK_THROWS_AS(full.backward(1.0), Error);  // no forward cached

    ModelConfig bad = small_config(8);
    bad.heads = 3;  // 128 % 3 != 0
    CHECK_THROWS_AS(build_variant(Variant::kFull, bad, 1), ConfigParseError);
}
