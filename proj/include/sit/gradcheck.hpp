#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sit/layers.hpp"

namespace sit {

struct GradCheckRow {
    std::string name;      // parameter name, or "input"
    double max_rel_err;
    bool pass;
};

struct GradCheckReport {
    std::vector<GradCheckRow> rows;
    double max_rel_err = 0.0;
    bool pass = true;
};

// Central finite differences at `step` against the layer's analytic
// gradients, with a fixed random upstream weighting so the probe target is
// the scalar J = <u, layer(x)>. Relative error |a-b| / max(1, |a|, |b|).
// max_coords_per_tensor == 0 probes every coordinate; a nonzero cap probes a
// seeded deterministic sample (needed to keep whole-model checks fast).
// Throws NonDeterministicLayer when two frozen forwards disagree bitwise.
GradCheckReport grad_check(Layer& layer, const Tensor& input, double tol,
                           double step = 1e-5, Mode mode = Mode::kEval,
                           std::size_t max_coords_per_tensor = 0,
                           std::uint64_t probe_seed = 0x5eed);

// Same check for an arbitrary differentiable scalar function: forward()
// returns J, backward() must populate the gradient views after zero_grad.
struct ScalarProbe {
    std::function<double()> forward;
    std::function<void()> backward;   // accumulates into grads
    std::vector<ParamView> coords;    // parameters (and inputs) to probe
};

GradCheckReport grad_check_scalar(const ScalarProbe& probe, double tol, double step = 1e-5,
                                  std::size_t max_coords_per_tensor = 0,
                                  std::uint64_t probe_seed = 0x5eed);

} // namespace sit
