#include "sit/metrics.hpp"

#include <cmath>

#include "sit/error.hpp"

namespace sit {
namespace {

void require_lengths(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size()) {
        throw LengthMismatch("metric vectors differ in length: " + std::to_string(y.size()) +
                             " vs " + std::to_string(yhat.size()));
    }
    if (y.empty()) {
        throw EmptyBatch("metric vectors must be nonempty");
    }
}

} // namespace

double mean_absolute_error(const std::vector<double>& y, const std::vector<double>& yhat) {
    require_lengths(y, yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        acc += std::abs(y[i] - yhat[i]);
    }
    return acc / static_cast<double>(y.size());
}

double root_mean_squared_error(const std::vector<double>& y, const std::vector<double>& yhat) {
    require_lengths(y, yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

double pearson_correlation(const std::vector<double>& y, const std::vector<double>& yhat) {
    require_lengths(y, yhat);
    const std::size_t n = y.size();
    if (n < 2) {
        throw DegenerateVariance("Pearson correlation needs at least two samples");
    }
    double ymean = 0.0, pmean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ymean += y[i];
        pmean += yhat[i];
    }
    ymean /= static_cast<double>(n);
    pmean /= static_cast<double>(n);
    double cov = 0.0, yvar = 0.0, pvar = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = y[i] - ymean;
        const double b = yhat[i] - pmean;
        cov += a * b;
        yvar += a * a;
        pvar += b * b;
    }
    if (yvar == 0.0 || pvar == 0.0) {
        throw DegenerateVariance("Pearson correlation undefined for a constant vector");
    }
    return cov / std::sqrt(yvar * pvar);
}

MetricsReport compute_metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
    MetricsReport report;
    report.mae = mean_absolute_error(y, yhat);
    report.rmse = root_mean_squared_error(y, yhat);
    report.pearson = pearson_correlation(y, yhat);
    report.n = y.size();
    return report;
}

MetricsReport compute_metrics_partial(const std::vector<double>& y,
                                      const std::vector<double>& yhat) {
    MetricsReport report;
    report.mae = mean_absolute_error(y, yhat);
    report.rmse = root_mean_squared_error(y, yhat);
    report.n = y.size();
    try {
        report.pearson = pearson_correlation(y, yhat);
    } catch (const DegenerateVariance&) {
        report.pearson.reset();
    }
    return report;
}

} // namespace sit
