#pragma once

#include <cstddef>
#include <string_view>

namespace sit::kernels {

// The arithmetic inner loops behind every tensor op. A scalar reference
// implementation always exists; wider variants are selected at startup from
// CPU features and are equivalence-tested against the reference. All loops
// operate on contiguous double arrays.
struct KernelTable {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);

    // y += a * x
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    // y += x
    void (*add)(double* y, const double* x, std::size_t n);
    // y *= x (elementwise)
    void (*mul)(double* y, const double* x, std::size_t n);
    // y *= a
    void (*scale)(double* y, double a, std::size_t n);
    // y = max(y, x) elementwise
    void (*max)(double* y, const double* x, std::size_t n);

    // y = max(0, x)
    void (*relu)(double* y, const double* x, std::size_t n);
    // dx = (x > 0) ? dy : 0
    void (*relu_grad)(double* dx, const double* x, const double* dy, std::size_t n);

    // Index of the first maximal element.
    std::size_t (*argmax)(const double* x, std::size_t n);

    // Bias-corrected Adam update over one parameter buffer.
    //   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    //   p -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
    // bc1 = 1 - b1^t and bc2 = 1 - b2^t are precomputed by the caller.
    void (*adam_update)(double* p, double* m, double* v, const double* g, std::size_t n,
                        double lr, double b1, double b2, double eps, double bc1, double bc2);
};

const KernelTable& scalar_table();

// Null when the binary or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table_or_null();

// Active table. Chosen on first use: SIT_KERNELS env var ("scalar"/"avx2")
// if set, otherwise the widest variant the CPU supports.
const KernelTable& active();

// Force a table by name; throws sit::Error for unknown or unavailable names.
void select(std::string_view name);

} // namespace sit::kernels
