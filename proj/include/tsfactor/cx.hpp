#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsfactor/dist_kernels.hpp"
#include "tsfactor/linalg.hpp"
#include "tsfactor/runtime.hpp"

namespace tsf {

/// Sketch-based SVD: a seeded Gaussian n x (k+slack) sketch B is refined by
/// power_iters rounds of B <- A^T A B followed by re-orthogonalization, then
/// Y = A Q is collected and factored on the driver. Exactly power_iters + 1
/// stages touch A. The sketch depends only on (seed, n), never on the
/// partitioning.
SpectralFactors randomized_svd(ExecContext& ctx, const DistMatrix& a, std::size_t k,
                               std::size_t slack, std::size_t power_iters,
                               std::uint64_t seed);

/// Row-wise squared norms of V: the leverage score of each of the n columns.
std::vector<double> leverage_scores(const DenseMatrix& v);

/// k i.i.d. draws (with replacement) from the distribution p via inverse CDF
/// on the seeded counter generator.
std::vector<std::size_t> sample_columns(std::span<const double> p, std::size_t k,
                                        std::uint64_t seed);

/// Bitwise copies of the requested columns of A, gathered in row order.
DenseMatrix extract_columns(ExecContext& ctx, const DistMatrix& a,
                            const std::vector<std::size_t>& indices);

struct CxResult {
    std::vector<std::size_t> indices;   // k sampled column ids, multiplicity kept
    DenseMatrix c;                      // m x k actual columns of A
    DenseMatrix x;                      // k x n, the optimal X for this C
    std::vector<double> leverage;       // n
    std::vector<double> probabilities;  // n, sums to 1
    std::uint64_t seed = 0;
};

/// CX decomposition: approximate right singular vectors by randomized_svd,
/// leverage scores -> sampling distribution -> k column draws; X is the
/// least-squares optimum for the sampled C (computed against the distributed
/// A through one Gramian-style stage).
CxResult cx(ExecContext& ctx, const DistMatrix& a, std::size_t k, std::size_t slack,
            std::size_t power_iters, std::uint64_t seed);

}  // namespace tsf
