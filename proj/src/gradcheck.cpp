#include "sit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sit/error.hpp"
#include "sit/kernels.hpp"

namespace sit {
namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Coordinates to probe: all when cap == 0 or the tensor is small, else a
// seeded sample without replacement.
std::vector<std::size_t> probe_coords(std::size_t n, std::size_t cap, RngStream& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (cap == 0 || n <= cap) return idx;
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j = i + rng.next_u64() % (n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(cap);
    return idx;
}

} // namespace

GradCheckReport grad_check_scalar(const ScalarProbe& probe, double tol, double step,
                                  std::size_t max_coords_per_tensor, std::uint64_t probe_seed) {
    for (const ParamView& p : probe.coords) p.grad->zero();
    const double base = probe.forward();
    if (probe.forward() != base) {
        throw NonDeterministicLayer("repeated forward under frozen state disagrees");
    }
    probe.backward();

    RngStream pick(probe_seed);
    GradCheckReport report;
    for (const ParamView& p : probe.coords) {
        double worst = 0.0;
        for (std::size_t i : probe_coords(p.value->size(), max_coords_per_tensor, pick)) {
            double& coord = (*p.value)[i];
            const double saved = coord;
            coord = saved + step;
            const double plus = probe.forward();
            coord = saved - step;
            const double minus = probe.forward();
            coord = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            worst = std::max(worst, rel_err((*p.grad)[i], numeric));
        }
        report.rows.push_back({p.name, worst, worst <= tol});
        report.max_rel_err = std::max(report.max_rel_err, worst);
    }
    report.pass = std::all_of(report.rows.begin(), report.rows.end(),
                              [](const GradCheckRow& r) { return r.pass; });
    return report;
}

GradCheckReport grad_check(Layer& layer, const Tensor& input, double tol, double step,
                           Mode mode, std::size_t max_coords_per_tensor,
                           std::uint64_t probe_seed) {
    // Fixed upstream weighting u makes the probe target scalar-valued:
    // J(theta, x) = <u, layer(x)>.
    layer.begin_probe();
    const Tensor probe_out = layer.forward(input, mode);
    layer.begin_probe();
    const Tensor repeat = layer.forward(input, mode);
    if (!bitwise_equal(probe_out, repeat)) {
        throw NonDeterministicLayer("repeated forward under frozen state disagrees");
    }
    RngStream urng(probe_seed ^ 0x9e3779b97f4a7c15ULL);
    Tensor upstream(probe_out.shape());
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        upstream[i] = urng.next_uniform(-1.0, 1.0);
    }

    Tensor x = input;
    Tensor input_grad(x.shape());

    ScalarProbe probe;
    probe.forward = [&]() {
        layer.begin_probe();
        const Tensor y = layer.forward(x, mode);
        return kernels::active().dot(upstream.data(), y.data(), y.size());
    };
    probe.backward = [&]() {
        layer.begin_probe();
        (void)layer.forward(x, mode);
        input_grad = layer.backward(upstream);
        if (input_grad.empty()) input_grad = Tensor(x.shape());
    };
    probe.coords = layer.params();
    probe.coords.push_back({"input", &x, &input_grad});
    return grad_check_scalar(probe, tol, step, max_coords_per_tensor, probe_seed);
}

} // namespace sit
