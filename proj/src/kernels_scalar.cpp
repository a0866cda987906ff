#include "tsfactor/kernels.hpp"

namespace tsf::kern {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_sq_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void add_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void gemm_nn_scalar(std::size_t m, std::size_t k, std::size_t n, double alpha,
                    const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* c, std::size_t ldc) {
    if (n == 1) {
        // Matrix-vector: one dot per output row (B is a contiguous column).
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            const double* ai = a + i * lda;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * b[p * ldb];
            c[i * ldc] += alpha * acc;
        }
        return;
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * lda;
        double* ci = c + i * ldc;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = alpha * ai[p];
            const double* bp = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
        }
    }
}

void gemm_tn_scalar(std::size_t m, std::size_t k, std::size_t n, double alpha,
                    const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* c, std::size_t ldc) {
    if (n == 1) {
        for (std::size_t r = 0; r < m; ++r) {
            const double s = alpha * b[r * ldb];
            const double* ar = a + r * lda;
            for (std::size_t i = 0; i < k; ++i) c[i * ldc] += s * ar[i];
        }
        return;
    }
    // Rank-1 update per input row; C stays hot while A and B stream once.
    for (std::size_t r = 0; r < m; ++r) {
        const double* ar = a + r * lda;
        const double* br = b + r * ldb;
        for (std::size_t i = 0; i < k; ++i) {
            const double s = alpha * ar[i];
            double* ci = c + i * ldc;
            for (std::size_t j = 0; j < n; ++j) ci[j] += s * br[j];
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        "scalar",    dot_scalar,     sum_sq_scalar,  axpy_scalar,
        scal_scalar, add_scalar,     gemm_nn_scalar, gemm_tn_scalar,
    };
    return table;
}

}  // namespace tsf::kern
