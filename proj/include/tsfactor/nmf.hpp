#pragma once

#include <cstddef>
#include <vector>

#include "tsfactor/dist_kernels.hpp"
#include "tsfactor/runtime.hpp"

namespace tsf {

struct XrayResult {
    std::vector<std::size_t> selected;  // column indices, in selection order
    DenseMatrix h;                      // k x n, entrywise nonnegative
};

/// Greedy separable-NMF column selection on the (small) R factor. Each step
/// picks the residual column of largest norm as the exterior direction p,
/// selects the unselected column maximizing the ratio p^T R(:,j) / s^T R(:,j)
/// with s the sum of all columns (a fixed functional that is positive on the
/// column cone, so the ratio peaks at an extreme ray), then refits H by one
/// NNLS solve per column of R against the chosen columns. Ties go to the
/// smallest index; zero columns are skipped until only zero columns remain.
XrayResult xray(const DenseMatrix& r, std::size_t k);

struct NmfResult {
    std::vector<std::size_t> selected;  // k column indices into A
    DenseMatrix w;                      // m x k: the selected (clamped) columns of A
    DenseMatrix h;                      // k x n nonnegative
    double relative_residual = 0.0;     // |R - R(:,K) H|_F / |R|_F
};

/// Separable NMF: TSQR to R, Xray on R (driver-side), W extracted from A by a
/// column-slice stage. Entries in [-clamp_eps, 0) are treated as zero; entries
/// below -clamp_eps raise a data error naming the offending block.
NmfResult nmf(ExecContext& ctx, const DistMatrix& a, std::size_t k, double clamp_eps = 1e-9);

/// Distributed |A - A(:,K) H|_F over the clamped matrix; one tree-sum stage.
double nmf_fit_residual(ExecContext& ctx, const DistMatrix& a,
                        const std::vector<std::size_t>& selected, const DenseMatrix& h,
                        double clamp_eps = 1e-9);

}  // namespace tsf
