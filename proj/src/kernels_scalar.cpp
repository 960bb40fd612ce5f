#include "sit/kernels.hpp"

#include <cmath>

namespace sit::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void mul_scalar(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

void scale_scalar(double* y, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void max_scalar(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > y[i]) y[i] = x[i];
    }
}

void relu_scalar(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_scalar(double* dx, const double* x, const double* dy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

std::size_t argmax_scalar(const double* x, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (x[i] > x[best]) best = i;
    }
    return best;
}

void adam_update_scalar(double* p, double* m, double* v, const double* g, std::size_t n,
                        double lr, double b1, double b2, double eps, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        "scalar",
        dot_scalar,
        sum_scalar,
        axpy_scalar,
        add_scalar,
        mul_scalar,
        scale_scalar,
        max_scalar,
        relu_scalar,
        relu_grad_scalar,
        argmax_scalar,
        adam_update_scalar,
    };
    return table;
}

} // namespace sit::kernels
