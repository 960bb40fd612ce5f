// AVX2+FMA variants of the kernel table. Compiled with -mavx2 -mfma on
// x86-64 only; callers go through the runtime dispatch in kernels.cpp.

#include "sit/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

namespace sit::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_avx2(double* y, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) y[i] += x[i];
}

void mul_avx2(double* y, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) y[i] *= x[i];
}

void scale_avx2(double* y, double a, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), av));
    }
    for (; i < n; ++i) y[i] *= a;
}

void max_avx2(double* y, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) {
        if (x[i] > y[i]) y[i] = x[i];
    }
}

void relu_avx2(double* y, const double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_avx2(double* dx, const double* x, const double* dy, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

std::size_t argmax_avx2(const double* x, std::size_t n) {
    // Vector pass finds the maximum value; a scan then finds its first
    // position, which preserves the row-major tie-break exactly.
    if (n == 0) return 0;
    std::size_t i = 0;
    double best = x[0];
    if (n >= 4) {
        __m256d bv = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4) {
            bv = _mm256_max_pd(bv, _mm256_loadu_pd(x + i));
        }
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, bv);
        best = lanes[0];
        for (int l = 1; l < 4; ++l) {
            if (lanes[l] > best) best = lanes[l];
        }
    }
    for (; i < n; ++i) {
        if (x[i] > best) best = x[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (x[j] == best) return j;
    }
    return 0;
}

void adam_update_avx2(double* p, double* m, double* v, const double* g, std::size_t n,
                      double lr, double b1, double b2, double eps, double bc1, double bc2) {
    const __m256d b1v = _mm256_set1_pd(b1);
    const __m256d b2v = _mm256_set1_pd(b2);
    const __m256d one_minus_b1 = _mm256_set1_pd(1.0 - b1);
    const __m256d one_minus_b2 = _mm256_set1_pd(1.0 - b2);
    const __m256d inv_bc1 = _mm256_set1_pd(1.0 / bc1);
    const __m256d inv_bc2 = _mm256_set1_pd(1.0 / bc2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_fmadd_pd(b1v, _mm256_loadu_pd(m + i), _mm256_mul_pd(one_minus_b1, gv));
        __m256d vv = _mm256_fmadd_pd(b2v, _mm256_loadu_pd(v + i),
                                     _mm256_mul_pd(one_minus_b2, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(mv, inv_bc1);
        const __m256d vhat = _mm256_mul_pd(vv, inv_bc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        const double gi = g[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mhat = m[i] * (1.0 / bc1);
        const double vhat = v[i] * (1.0 / bc2);
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const KernelTable* avx2_table_or_null() {
    if (!(__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))) {
        return nullptr;
    }
    static const KernelTable table = {
        "avx2",
        dot_avx2,
        sum_avx2,
        axpy_avx2,
        add_avx2,
        mul_avx2,
        scale_avx2,
        max_avx2,
        relu_avx2,
        relu_grad_avx2,
        argmax_avx2,
        adam_update_avx2,
    };
    return &table;
}

} // namespace sit::kernels

#else

namespace sit::kernels {

const KernelTable* avx2_table_or_null() { return nullptr; }

} // namespace sit::kernels

#endif
