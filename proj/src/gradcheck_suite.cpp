#include "sit/gradcheck_suite.hpp"

#include "sit/model.hpp"
#include "sit/transformer.hpp"

namespace sit {
namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_uniform(lo, hi);
    return t;
}

// Values bounded away from 0 for kink-free ReLU probing.
Tensor signed_tensor(std::vector<std::size_t> shape, RngStream& rng, double margin = 0.05) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double mag = margin + rng.next_unit();
        t[i] = rng.next_unit() < 0.5 ? -mag : mag;
    }
    return t;
}

// Spatially-jittered positive values keep max-pool routing stable under the
// probe step.
Tensor jittered_tensor(std::vector<std::size_t> shape, RngStream& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.next_unit() + 1e-3 * static_cast<double>(i % 89);
    }
    return t;
}

class DoubledBackward : public Layer {
public:
    explicit DoubledBackward(Layer& inner) : inner_(inner) {}
    Tensor forward(const Tensor& x, Mode mode) override { return inner_.forward(x, mode); }
    Tensor backward(const Tensor& dy) override {
        Tensor dx = inner_.backward(dy);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 2.0;
        return dx;
    }
    void collect_params(std::vector<ParamView>& out, const std::string& prefix) override {
        inner_.collect_params(out, prefix);
    }
    void begin_probe() override { inner_.begin_probe(); }

private:
    Layer& inner_;
};

} // namespace

SuiteReport run_gradcheck_suite(std::uint64_t seed, std::size_t c_b, double tol,
                                const std::string& corrupt) {
    SuiteReport report;
    RngStream rng(seed);

    auto check_layer = [&](const std::string& name, Layer& layer, const Tensor& input,
                           double row_tol, Mode mode) {
        GradCheckReport r;
        if (corrupt == name) {
            DoubledBackward bad(layer);
            r = grad_check(bad, input, row_tol, 1e-5, mode);
        } else {
            r = grad_check(layer, input, row_tol, 1e-5, mode);
        }
        report.rows.push_back({name, r.max_rel_err, r.pass});
        report.pass = report.pass && r.pass;
    };

    // Scale-branch convolutions at the three published kernel sizes.
    for (std::size_t k : {1u, 3u, 5u}) {
        Conv2dLayer conv(k, 3, 4, 1, (k - 1) / 2);
        conv.init(rng.fork(k));
        check_layer("conv" + std::to_string(k) + "x" + std::to_string(k), conv,
                    uniform_tensor({5, 5, 3}, rng, -1.0, 1.0), tol, Mode::kEval);
    }
    {
        // Backbone downsampling stage.
        Conv2dLayer conv(3, 3, 4, 2, 1);
        conv.init(rng.fork(17));
        check_layer("conv3x3_s2", conv, uniform_tensor({6, 6, 3}, rng, -1.0, 1.0), tol,
                    Mode::kEval);
    }
    {
        ReluLayer relu;
        check_layer("relu", relu, signed_tensor({4, 6}, rng), tol, Mode::kEval);
    }
    {
        LayerNormLayer ln(10);
        RngStream grng = rng.fork(19);
        for (std::size_t i = 0; i < 10; ++i) ln.gamma[i] = grng.next_uniform(0.5, 1.5);
        check_layer("layer_norm", ln, uniform_tensor({3, 10}, rng, -2.0, 2.0), tol, Mode::kEval);
    }
    {
        SoftmaxRowsLayer softmax;
        check_layer("softmax_rows", softmax, uniform_tensor({3, 5}, rng, -2.0, 2.0), tol,
                    Mode::kEval);
    }
    {
        MultiHeadAttention attn(8, 2, rng.fork(23));
        check_layer("softmax_attention", attn, uniform_tensor({3, 8}, rng, -1.0, 1.0), tol,
                    Mode::kEval);
    }
    {
        DropoutLayer drop(0.3, RngStream(seed ^ 0xd0));
        check_layer("dropout_frozen", drop, uniform_tensor({5, 5}, rng, -1.0, 1.0), tol,
                    Mode::kTrain);
    }
    {
        GlobalAvgPoolLayer gap;
        check_layer("global_avg_pool", gap, jittered_tensor({4, 4, 3}, rng), tol, Mode::kEval);
    }
    {
        GlobalMaxPoolLayer gmp;
        check_layer("global_max_pool", gmp, jittered_tensor({4, 4, 3}, rng), tol, Mode::kEval);
    }
    {
        SequencePoolLayer pool;
        check_layer("sequence_pool", pool, uniform_tensor({3, 9}, rng, -1.0, 1.0), tol,
                    Mode::kEval);
    }
    {
        DenseLayer dense(7, 4);
        dense.init(rng.fork(29));
        check_layer("affine", dense, uniform_tensor({3, 7}, rng, -1.0, 1.0), tol, Mode::kEval);
    }
    {
        TransformerBlock block(8, 2, 12, 0.1, rng.fork(31), RngStream(seed ^ 0xb1));
        check_layer("transformer_block", block, uniform_tensor({3, 8}, rng, -1.0, 1.0), tol,
                    Mode::kEval);
    }

    // End-to-end model at reduced width.
    {
        ModelConfig cfg;
        cfg.backbone_channels = c_b;
        SITModel model = build_variant(Variant::kFull, cfg, seed);
        Tensor fbase = jittered_tensor({7, 7, c_b}, rng);
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
        const GradCheckReport r = grad_check_scalar(probe, tol, 1e-7, 12, seed ^ 0xf111);
        report.rows.push_back({"full_model", r.max_rel_err, r.pass});
        report.pass = report.pass && r.pass;
    }
    return report;
}

} // namespace sit
