#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sit/rng.hpp"
#include "sit/tensor.hpp"

namespace testsupport {

// Independent central-difference oracle: perturbs coords[i] of an arbitrary
// scalar function. Kept free of the engine's gradcheck path on purpose.
inline double numeric_partial(const std::function<double()>& f, double& coord,
                              double step = 1e-5) {
    const double saved = coord;
    coord = saved + step;
    const double plus = f();
    coord = saved - step;
    const double minus = f();
    coord = saved;
    return (plus - minus) / (2.0 * step);
}

inline double rel_err(double a, double b) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

inline sit::Tensor random_tensor(std::vector<std::size_t> shape, sit::RngStream& rng,
                                 double lo = -1.0, double hi = 1.0) {
    sit::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.next_uniform(lo, hi);
    }
    return t;
}

// Values bounded away from zero, for kink-sensitive checks (ReLU).
inline sit::Tensor random_tensor_away_from_zero(std::vector<std::size_t> shape,
                                                sit::RngStream& rng, double margin = 0.05) {
    sit::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double mag = margin + rng.next_uniform(0.0, 1.0);
        t[i] = rng.next_unit() < 0.5 ? -mag : mag;
    }
    return t;
}

} // namespace testsupport
