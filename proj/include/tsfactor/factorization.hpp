#pragma once

#include <variant>

#include "tsfactor/cx.hpp"
#include "tsfactor/nmf.hpp"
#include "tsfactor/pca.hpp"

namespace tsf {

/// Whatever a factorization run produced: (U, sigma, V) for PCA/SVD,
/// (K, W, H) for NMF, (C, X, indices, scores) for CX.
using FactorizationResult = std::variant<PcaResult, NmfResult, CxResult>;

}  // namespace tsf
