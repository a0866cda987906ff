// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; the dispatcher only hands the table out when CPUID reports
// both features, so nothing here runs on unsupported hardware.

#include <immintrin.h>

#include "tsfactor/kernels.hpp"

namespace tsf::kern {
namespace {

inline double hsum4(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d r0 = _mm256_setzero_pd();
    __m256d r1 = _mm256_setzero_pd();
    __m256d r2 = _mm256_setzero_pd();
    __m256d r3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        r0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), r0);
        r1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), r1);
        r2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), r2);
        r3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), r3);
    }
    for (; i + 4 <= n; i += 4) {
        r0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), r0);
    }
    double acc = hsum4(_mm256_add_pd(_mm256_add_pd(r0, r1), _mm256_add_pd(r2, r3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_sq_avx2(const double* x, std::size_t n) {
    __m256d r0 = _mm256_setzero_pd();
    __m256d r1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d a = _mm256_loadu_pd(x + i);
        const __m256d b = _mm256_loadu_pd(x + i + 4);
        r0 = _mm256_fmadd_pd(a, a, r0);
        r1 = _mm256_fmadd_pd(b, b, r1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d a = _mm256_loadu_pd(x + i);
        r0 = _mm256_fmadd_pd(a, a, r0);
    }
    double acc = hsum4(_mm256_add_pd(r0, r1));
    for (; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(
            y + i + 4,
            _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= a;
}

void add_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += x[i];
}

// dst[0:n] += s * src[0:n]
inline void fma_row(double s, const double* src, double* dst, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        _mm256_storeu_pd(
            dst + j, _mm256_fmadd_pd(vs, _mm256_loadu_pd(src + j), _mm256_loadu_pd(dst + j)));
        _mm256_storeu_pd(dst + j + 4, _mm256_fmadd_pd(vs, _mm256_loadu_pd(src + j + 4),
                                                      _mm256_loadu_pd(dst + j + 4)));
    }
    for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(
            dst + j, _mm256_fmadd_pd(vs, _mm256_loadu_pd(src + j), _mm256_loadu_pd(dst + j)));
    }
    for (; j < n; ++j) dst[j] += s * src[j];
}

void gemm_nn_avx2(std::size_t m, std::size_t k, std::size_t n, double alpha,
                  const double* a, std::size_t lda, const double* b, std::size_t ldb,
                  double* c, std::size_t ldc) {
    if (n == 1) {
        if (ldb == 1) {
            for (std::size_t i = 0; i < m; ++i) {
                c[i * ldc] += alpha * dot_avx2(a + i * lda, b, k);
            }
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                double acc = 0.0;
                const double* ai = a + i * lda;
                for (std::size_t p = 0; p < k; ++p) acc += ai[p] * b[p * ldb];
                c[i * ldc] += alpha * acc;
            }
        }
        return;
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * lda;
        double* ci = c + i * ldc;
        for (std::size_t p = 0; p < k; ++p) {
            fma_row(alpha * ai[p], b + p * ldb, ci, n);
        }
    }
}

void gemm_tn_avx2(std::size_t m, std::size_t k, std::size_t n, double alpha,
                  const double* a, std::size_t lda, const double* b, std::size_t ldb,
                  double* c, std::size_t ldc) {
    if (n == 1) {
        for (std::size_t r = 0; r < m; ++r) {
            const double s = alpha * b[r * ldb];
            const double* ar = a + r * lda;
            if (ldc == 1) {
                axpy_avx2(s, ar, c, k);
            } else {
                for (std::size_t i = 0; i < k; ++i) c[i * ldc] += s * ar[i];
            }
        }
        return;
    }
    for (std::size_t r = 0; r < m; ++r) {
        const double* ar = a + r * lda;
        const double* br = b + r * ldb;
        for (std::size_t i = 0; i < k; ++i) {
            fma_row(alpha * ar[i], br, c + i * ldc, n);
        }
    }
}

}  // namespace

const KernelTable* avx2_table_impl() {
    static const KernelTable table = {
        "avx2",    dot_avx2,     sum_sq_avx2,  axpy_avx2,
        scal_avx2, add_avx2,     gemm_nn_avx2, gemm_tn_avx2,
    };
    return &table;
}

}  // namespace tsf::kern
