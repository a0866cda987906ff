#pragma once

#include <functional>
#include <vector>

#include "tsfactor/linalg.hpp"
#include "tsfactor/runtime.hpp"

namespace tsf {

/// A^T A B as one tree-summed stage: each block contributes
/// Block^T (Block B), so a single communication round suffices.
DenseMatrix multiply_gramian(ExecContext& ctx, const DistMatrix& a, const DenseMatrix& b);

/// A * B gathered to the driver in global row order. The m x cols(B) result
/// must fit in driver memory; that is the caller's bargain.
DenseMatrix multiply_collect(ExecContext& ctx, const DistMatrix& a, const DenseMatrix& b);

/// Tree TSQR: local R per block, R factors stacked pairwise and re-factored
/// up the reduction tree. Returns the n x n upper-triangular R with
/// nonnegative diagonal. Requires cols(A) <= global_rows(A).
DenseMatrix tsqr(ExecContext& ctx, const DistMatrix& a);

namespace detail {

/// TSQR over a caller-supplied local R map (validation or clamping hooks).
DenseMatrix tsqr_mapped(ExecContext& ctx, const DistMatrix& a,
                        const std::function<DenseMatrix(const RowBlock&)>& local_r);

/// Ordered gather: per-block pieces merged by row offset up the tree, then
/// assembled into one dense matrix.
DenseMatrix gather_stage(ExecContext& ctx, const DistMatrix& a, std::size_t out_cols,
                         const std::function<DenseMatrix(const RowBlock&)>& piece);

}  // namespace detail

}  // namespace tsf
