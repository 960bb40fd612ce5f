#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace sit {

struct MetricsReport {
    double mae = 0.0;
    double rmse = 0.0;
    // Empty when the Pearson correlation is undefined (constant vector);
    // compute_metrics surfaces that case as DegenerateVariance instead.
    std::optional<double> pearson;
    std::size_t n = 0;
};

double mean_absolute_error(const std::vector<double>& y, const std::vector<double>& yhat);
double root_mean_squared_error(const std::vector<double>& y, const std::vector<double>& yhat);

// Throws DegenerateVariance when either vector is constant, LengthMismatch
// on unequal lengths; requires n >= 2.
double pearson_correlation(const std::vector<double>& y, const std::vector<double>& yhat);

// MAE, RMSE, and PC in one report. Throws DegenerateVariance rather than
// reporting a sentinel correlation.
MetricsReport compute_metrics(const std::vector<double>& y, const std::vector<double>& yhat);

// Same, but a degenerate PC yields an empty optional instead of a throw
// (MAE and RMSE are still well-defined and wanted by the CLI).
MetricsReport compute_metrics_partial(const std::vector<double>& y,
                                      const std::vector<double>& yhat);

} // namespace sit
