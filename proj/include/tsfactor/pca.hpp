#pragma once

#include <cstdint>
#include <vector>

#include "tsfactor/dist_kernels.hpp"
#include "tsfactor/linalg.hpp"
#include "tsfactor/runtime.hpp"

namespace tsf {

struct PcaResult {
    SpectralFactors factors;           // U m x k, sigma k, V n x k
    std::size_t iterations_used = 0;   // operator applications of the eigensolver
    bool centered = false;
    std::vector<double> column_means;  // n entries; zeros when centered == false
    std::vector<EigsRestartLog> eig_history;
};

/// Per-column mean of a distributed matrix, one tree-sum stage.
std::vector<double> column_means(ExecContext& ctx, const DistMatrix& a);

/// Rank-k PCA of a row-partitioned matrix. The eigensolver sees the Gramian
/// operator v -> A^T A v; with center=true the column means are folded in as
/// the rank-one correction A^T A v - m mu (mu^T v), so the centered matrix is
/// never materialized. tol <= 0 runs a fixed budget of max_iters operator
/// applications (no convergence check). With center=false this is a truncated
/// SVD of A.
PcaResult pca(ExecContext& ctx, const DistMatrix& a, std::size_t k, bool center,
              double tol = 1e-8, std::size_t max_iters = 300);

}  // namespace tsf
