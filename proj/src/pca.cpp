#include "tsfactor/pca.hpp"

#include <algorithm>
#include <cmath>

#include "tsfactor/errors.hpp"
#include "tsfactor/kernels.hpp"

namespace tsf {

std::vector<double> column_means(ExecContext& ctx, const DistMatrix& a) {
    if (a.global_rows() == 0) throw DimensionError("column_means: empty matrix");
    const std::size_t n = a.cols();
    auto map = [n](const RowBlock& blk) {
        std::vector<double> sums(n, 0.0);
        for (std::size_t r = 0; r < blk.data.rows(); ++r) {
            kern::add(blk.data.row(r), sums.data(), n);
        }
        return sums;
    };
    auto combine = [n](std::vector<double> x, std::vector<double> y) {
        kern::add(y.data(), x.data(), n);
        return x;
    };
    std::vector<double> sums = ctx.execute_stage(a, map, combine).first;
    const double inv = 1.0 / static_cast<double>(a.global_rows());
    kern::scal(inv, sums.data(), n);
    return sums;
}

PcaResult pca(ExecContext& ctx, const DistMatrix& a, std::size_t k, bool center, double tol,
              std::size_t max_iters) {
    const std::size_t m = a.global_rows();
    const std::size_t n = a.cols();
    if (k < 1 || k > std::min(m, n)) {
        throw DimensionError("pca: k=" + std::to_string(k) + " outside [1, min(" +
                             std::to_string(m) + ", " + std::to_string(n) + ")]");
    }

    PcaResult result;
    result.centered = center;
    result.column_means.assign(n, 0.0);
    if (center) result.column_means = column_means(ctx, a);
    const std::vector<double>& mu = result.column_means;
    const double md = static_cast<double>(m);

    // Gramian operator with the implicit centering correction:
    // (A - 1 mu^T)^T (A - 1 mu^T) v = A^T A v - m mu (mu^T v).
    LinearOp op = [&](std::span<const double> in, std::span<double> out) {
        DenseMatrix b(n, 1);
        for (std::size_t i = 0; i < n; ++i) b(i, 0) = in[i];
        DenseMatrix g = multiply_gramian(ctx, a, b);
        if (center) {
            const double mv = kern::dot(mu.data(), in.data(), n);
            for (std::size_t i = 0; i < n; ++i) g(i, 0) -= md * mu[i] * mv;
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = g(i, 0);
    };

    EigsResult eigs = symmetric_eigs(op, n, k, tol, max_iters);
    result.iterations_used = eigs.op_applications;
    result.eig_history = std::move(eigs.history);

    DenseMatrix y = multiply_collect(ctx, a, eigs.vectors);
    if (center) {
        // Y_c = (A - 1 mu^T) V = Y - 1 (mu^T V)
        std::vector<double> shift(k, 0.0);
        kern::gemm_tn(n, k, 1, 1.0, eigs.vectors.data(), k, mu.data(), 1, shift.data(), 1);
        for (std::size_t r = 0; r < m; ++r) {
            kern::axpy(-1.0, shift.data(), y.row(r), k);
        }
    }

    SpectralFactors svd = thin_svd(y);
    result.factors.u = std::move(svd.u);
    result.factors.sigma = std::move(svd.sigma);
    result.factors.v = std::move(eigs.vectors);
    return result;
}

}  // namespace tsf
