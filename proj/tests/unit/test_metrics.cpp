#include <doctest.h>

#include <cmath>

#include "sit/error.hpp"
#include "sit/metrics.hpp"
#include "sit/rng.hpp"

using namespace sit;

namespace {

// Direct summation of the three definitions; the oracle for the agreement
// property below.
struct DirectMetrics {
    double mae, rmse, pc;
};

DirectMetrics direct(const std::vector<double>& y, const std::vector<double>& yhat) {
    const std::size_t n = y.size();
    double abs_sum = 0.0, sq_sum = 0.0, ysum = 0.0, psum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        abs_sum += std::abs(y[i] - yhat[i]);
        sq_sum += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ysum += y[i];
        psum += yhat[i];
    }
    const double ybar = ysum / n, pbar = psum / n;
    double num = 0.0, dy = 0.0, dp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (y[i] - ybar) * (yhat[i] - pbar);
        dy += (y[i] - ybar) * (y[i] - ybar);
        dp += (yhat[i] - pbar) * (yhat[i] - pbar);
    }
    return {abs_sum / n, std::sqrt(sq_sum / n), num / std::sqrt(dy * dp)};
}

} // namespace

TEST_CASE("metric worked examples") {
    const std::vector<double> y{1, 2, 4};
    const std::vector<double> yhat{1, 3, 3};
    const MetricsReport r = compute_metrics(y, yhat);
    CHECK(r.mae == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.rmse == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(r.rmse == doctest::Approx(0.8165).epsilon(1e-4));
    REQUIRE(r.pearson.has_value());
    CHECK(*r.pearson == doctest::Approx(2.0 / std::sqrt(7.0)).epsilon(1e-12));
    CHECK(*r.pearson == doctest::Approx(0.7559).epsilon(1e-4));
    CHECK(r.n == 3);

    // Perfect predictions.
    const MetricsReport perfect = compute_metrics(y, y);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.rmse == 0.0);
    CHECK(*perfect.pearson == doctest::Approx(1.0));

    // Constant shift: errors equal the shift, correlation unchanged.
    const std::vector<double> shifted{1.5, 2.5, 4.5};
    const MetricsReport shift = compute_metrics(y, shifted);
    CHECK(shift.mae == doctest::Approx(0.5));
    CHECK(shift.rmse == doctest::Approx(0.5));
    CHECK(*shift.pearson == doctest::Approx(1.0));
}

TEST_CASE("metric error cases") {
    CHECK_THROWS_AS(compute_metrics({1, 2}, {1}), LengthMismatch);
    CHECK_THROWS_AS(compute_metrics({1, 1, 1}, {1, 2, 3}), DegenerateVariance);
    CHECK_THROWS_AS(compute_metrics({1, 2, 3}, {2, 2, 2}), DegenerateVariance);
    CHECK_THROWS_AS(pearson_correlation({1}, {1}), DegenerateVariance);

    // Partial report keeps MAE/RMSE when PC is undefined.
    const MetricsReport partial = compute_metrics_partial({1, 2, 3}, {2, 2, 2});
    CHECK_FALSE(partial.pearson.has_value());
    CHECK(partial.mae == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("compute_metrics agrees with direct summation on 1000 random pairs") {
    RngStream rng(151);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.next_u64() % 60;
        std::vector<double> y(n), yhat(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.next_uniform(1.0, 5.0);
            yhat[i] = rng.next_uniform(1.0, 5.0);
        }
        const DirectMetrics expect = direct(y, yhat);
        const MetricsReport got = compute_metrics(y, yhat);
        REQUIRE(std::abs(got.mae - expect.mae) <= 1e-12);
        REQUIRE(std::abs(got.rmse - expect.rmse) <= 1e-12);
        REQUIRE(std::abs(*got.pearson - expect.pc) <= 1e-12);
    }
}

TEST_CASE("metric invariants: rmse >= mae, pc in [-1,1], affine invariance") {
    RngStream rng(152);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.next_u64() % 30;
        std::vector<double> y(n), yhat(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.next_uniform(-3.0, 3.0);
            yhat[i] = rng.next_uniform(-3.0, 3.0);
        }
        MetricsReport r;
        try {
            r = compute_metrics(y, yhat);
        } catch (const DegenerateVariance&) {
            continue;  // random degenerate draws are legal inputs to skip
        }
        CHECK(r.rmse >= r.mae);
        CHECK(*r.pearson >= -1.0 - 1e-15);
        CHECK(*r.pearson <= 1.0 + 1e-15);

        // PC is invariant under positive-affine transforms of yhat.
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = 2.5 * yhat[i] + 1.25;
        const MetricsReport r2 = compute_metrics(y, scaled);
        CHECK(*r2.pearson == doctest::Approx(*r.pearson).epsilon(1e-12));
    }
}
