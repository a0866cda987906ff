#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tsfactor/dense_matrix.hpp"

namespace tsf {

struct QrResult {
    DenseMatrix q;
    DenseMatrix r;
};

/// Thin SVD factors. sigma is descending and nonnegative; u and v have
/// orthonormal columns.
struct SpectralFactors {
    DenseMatrix u;
    std::vector<double> sigma;
    DenseMatrix v;
};

/// Matrix-free application of a symmetric PSD operator: out = S * in.
using LinearOp = std::function<void(std::span<const double> in, std::span<double> out)>;

/// One Rayleigh-Ritz cycle of the eigensolver: operator applications so far
/// and the residual estimate per wanted pair.
struct EigsRestartLog {
    std::size_t ops = 0;
    std::vector<double> residuals;
};

struct EigsResult {
    std::vector<double> values;   // k, descending
    DenseMatrix vectors;          // n x k, orthonormal columns
    std::size_t op_applications = 0;
    std::vector<EigsRestartLog> history;
};

/// Householder QR of a tall matrix (rows >= cols). R has a nonnegative
/// diagonal, which makes the factorization unique (and bitwise reproducible)
/// for full-column-rank input. Rank-deficient input yields zeros on R's
/// diagonal rather than an error.
QrResult thin_qr(const DenseMatrix& m);

/// R factor only, for any shape: min(rows, cols) x cols, upper trapezoidal.
/// Shares the elimination loop with thin_qr, so for rows >= cols the result is
/// bitwise identical to thin_qr(m).r.
DenseMatrix qr_r_factor(const DenseMatrix& m);

/// One-sided Jacobi SVD. Each right singular vector is sign-normalized so its
/// first nonzero entry is positive.
SpectralFactors thin_svd(const DenseMatrix& m);

/// Top-k eigenpairs of a symmetric PSD operator: Lanczos with full
/// reorthogonalization and thick restarts. Converged when every wanted pair
/// satisfies |S v - lambda v| <= tol * lambda_1. tol <= 0 switches to a fixed
/// budget of exactly max_iters operator applications with no convergence
/// check. Throws ConvergenceError (with achieved residuals) when tol > 0 and
/// the budget runs out.
EigsResult symmetric_eigs(const LinearOp& op, std::size_t n, std::size_t k, double tol,
                          std::size_t max_iters);

/// Lawson-Hanson nonnegative least squares: argmin |Mx - b| over x >= 0.
std::vector<double> nnls(const DenseMatrix& m, std::span<const double> b);

/// Minimum-norm X minimizing |A - CX|_F (SVD pseudoinverse; rank-deficient C
/// is fine).
DenseMatrix least_squares(const DenseMatrix& c, const DenseMatrix& a);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// A^T * B without forming A^T.
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);

namespace detail {

/// Cyclic Jacobi eigendecomposition of a small dense symmetric matrix.
/// Values descending, vectors orthonormal columns.
void jacobi_eigh(const DenseMatrix& s, std::vector<double>& values, DenseMatrix& vectors);

}  // namespace detail

}  // namespace tsf
