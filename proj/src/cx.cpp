#include "tsfactor/cx.hpp"

#include <algorithm>
#include <cmath>

#include "tsfactor/errors.hpp"
#include "tsfactor/kernels.hpp"
#include "tsfactor/rng.hpp"

namespace tsf {

SpectralFactors randomized_svd(ExecContext& ctx, const DistMatrix& a, std::size_t k,
                               std::size_t slack, std::size_t power_iters,
                               std::uint64_t seed) {
    const std::size_t n = a.cols();
    if (k < 1 || k + slack > n) {
        throw DimensionError("randomized_svd: k + slack = " + std::to_string(k + slack) +
                             " outside [1, " + std::to_string(n) + "]");
    }
    if (power_iters < 1) throw ConfigError("randomized_svd: power iterations must be >= 1");

    const std::size_t ell = k + slack;
    DenseMatrix b(n, ell);
    for (std::size_t i = 0; i < b.size(); ++i) {
        b.data()[i] = rng::gaussian(seed, rng::kGaussianSketch, i);
    }

    for (std::size_t it = 0; it < power_iters; ++it) {
        b = multiply_gramian(ctx, a, b);
        validate_finite(b, "randomized_svd: power iteration " + std::to_string(it));
        b = thin_qr(b).q;
    }

    DenseMatrix q(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) q(i, j) = b(i, j);
    }

    DenseMatrix y = multiply_collect(ctx, a, q);
    SpectralFactors f = thin_svd(y);
    SpectralFactors out;
    out.u = std::move(f.u);
    out.sigma = std::move(f.sigma);
    out.v = matmul(q, f.v);
    return out;
}

std::vector<double> leverage_scores(const DenseMatrix& v) {
    std::vector<double> scores(v.rows());
    for (std::size_t i = 0; i < v.rows(); ++i) {
        scores[i] = kern::sum_sq(v.row(i), v.cols());
    }
    return scores;
}

std::vector<std::size_t> sample_columns(std::span<const double> p, std::size_t k,
                                        std::uint64_t seed) {
    const std::size_t n = p.size();
    if (n == 0) throw DimensionError("sample_columns: empty distribution");
    double total = 0.0;
    for (double pi : p) {
        if (pi < 0.0) throw DataError("sample_columns: negative probability");
        total += pi;
    }
    if (total == 0.0) throw DataError("sample_columns: all-zero distribution");
    if (std::abs(total - 1.0) > 1e-9) {
        throw DataError("sample_columns: probabilities sum to " + std::to_string(total) +
                        ", not 1 within 1e-9");
    }

    std::vector<double> cum(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += p[i];
        cum[i] = acc;
    }

    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double u = rng::uniform(seed, rng::kColumnSampling, i) * total;
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        out[i] = std::min<std::size_t>(it - cum.begin(), n - 1);
    }
    return out;
}

DenseMatrix extract_columns(ExecContext& ctx, const DistMatrix& a,
                            const std::vector<std::size_t>& indices) {
    for (std::size_t idx : indices) {
        if (idx >= a.cols()) {
            throw DimensionError("extract_columns: index " + std::to_string(idx) +
                                 " out of range for " + std::to_string(a.cols()) + " cols");
        }
    }
    return detail::gather_stage(ctx, a, indices.size(), [&indices](const RowBlock& blk) {
        DenseMatrix piece(blk.data.rows(), indices.size());
        for (std::size_t i = 0; i < blk.data.rows(); ++i) {
            for (std::size_t j = 0; j < indices.size(); ++j) {
                piece(i, j) = blk.data(i, indices[j]);
            }
        }
        return piece;
    });
}

CxResult cx(ExecContext& ctx, const DistMatrix& a, std::size_t k, std::size_t slack,
            std::size_t power_iters, std::uint64_t seed) {
    CxResult result;
    result.seed = seed;

    SpectralFactors f = randomized_svd(ctx, a, k, slack, power_iters, seed);
    result.leverage = leverage_scores(f.v);

    double total = 0.0;
    for (double l : result.leverage) total += l;
    result.probabilities.resize(result.leverage.size());
    for (std::size_t i = 0; i < result.leverage.size(); ++i) {
        result.probabilities[i] = total > 0.0 ? result.leverage[i] / total : 0.0;
    }

    result.indices = sample_columns(result.probabilities, k, seed);
    result.c = extract_columns(ctx, a, result.indices);

    // X = C^+ A without collecting A: pseudoinverse of the (driver-local) C,
    // with U_c^T A accumulated block by block in one stage.
    SpectralFactors cf = thin_svd(result.c);
    const std::size_t rank_cols = cf.sigma.size();
    const DenseMatrix& uc = cf.u;
    auto map = [&uc, rank_cols](const RowBlock& blk) {
        DenseMatrix t(rank_cols, blk.data.cols());
        kern::gemm_tn(blk.data.rows(), rank_cols, blk.data.cols(), 1.0,
                      uc.row(blk.row_offset), rank_cols, blk.data.data(), blk.data.cols(),
                      t.data(), t.cols());
        return t;
    };
    auto combine = [](DenseMatrix x, DenseMatrix y) {
        kern::add(y.data(), x.data(), x.size());
        return x;
    };
    DenseMatrix t = ctx.execute_stage(a, map, combine).first;

    const double cutoff = cf.sigma.empty() ? 0.0 : cf.sigma[0] * 1e-12;
    for (std::size_t i = 0; i < rank_cols; ++i) {
        const double s = cf.sigma[i] > cutoff ? 1.0 / cf.sigma[i] : 0.0;
        kern::scal(s, t.row(i), t.cols());
    }
    result.x = matmul(cf.v, t);
    return result;
}

}  // namespace tsf
