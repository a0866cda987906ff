#pragma once

#include <cstddef>
#include <vector>

namespace tsf::kern {

// Data-parallel inner loops behind the dense kernels. Scalar reference
// implementations and an AVX2+FMA variant share this table; the active one is
// picked once at startup from CPUID. All matrices are row-major with an
// explicit leading dimension (elements between row starts).

struct KernelTable {
    const char* name;

    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum_sq)(const double* x, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*scal)(double a, double* x, std::size_t n);
    // y += x
    void (*add)(const double* x, double* y, std::size_t n);
    // C (m x n) += alpha * A (m x k) * B (k x n)
    void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n, double alpha,
                    const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* c, std::size_t ldc);
    // C (k x n) += alpha * A^T * B, with A m x k and B m x n
    void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n, double alpha,
                    const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* c, std::size_t ldc);
};

const KernelTable& scalar_table();

/// AVX2+FMA variant; nullptr when the CPU lacks the instructions.
const KernelTable* avx2_table();

/// The table in use, chosen once (AVX2 when available, scalar otherwise).
const KernelTable& active();

/// Every table runnable on this machine, scalar first. For equivalence tests.
std::vector<const KernelTable*> available_tables();

inline double dot(const double* x, const double* y, std::size_t n) {
    return active().dot(x, y, n);
}
inline double sum_sq(const double* x, std::size_t n) { return active().sum_sq(x, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) {
    active().axpy(a, x, y, n);
}
inline void scal(double a, double* x, std::size_t n) { active().scal(a, x, n); }
inline void add(const double* x, double* y, std::size_t n) { active().add(x, y, n); }
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n, double alpha,
                    const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* c, std::size_t ldc) {
    active().gemm_nn(m, k, n, alpha, a, lda, b, ldb, c, ldc);
}
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n, double alpha,
                    const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* c, std::size_t ldc) {
    active().gemm_tn(m, k, n, alpha, a, lda, b, ldb, c, ldc);
}

}  // namespace tsf::kern
