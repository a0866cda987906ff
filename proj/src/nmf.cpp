#include "tsfactor/nmf.hpp"

#include <algorithm>
#include <cmath>

#include "tsfactor/errors.hpp"
#include "tsfactor/kernels.hpp"
#include "tsfactor/linalg.hpp"

namespace tsf {
namespace {

std::vector<double> column_of(const DenseMatrix& m, std::size_t j) {
    std::vector<double> col(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) col[i] = m(i, j);
    return col;
}

DenseMatrix columns_of(const DenseMatrix& m, const std::vector<std::size_t>& idx) {
    DenseMatrix out(m.rows(), idx.size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = m(i, idx[j]);
    }
    return out;
}

/// Copy of a block with tiny negatives zeroed; entries below -eps are a hard
/// data fault and name the block's row range.
DenseMatrix clamp_block(const RowBlock& blk, double eps) {
    DenseMatrix out = blk.data;
    double* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (p[i] < 0.0) {
            if (p[i] < -eps) {
                throw DataError("nonnegative input violated in block rows [" +
                                std::to_string(blk.row_offset) + ", " +
                                std::to_string(blk.row_offset + out.rows()) + "): entry (" +
                                std::to_string(i / out.cols()) + ", " +
                                std::to_string(i % out.cols()) + ") = " +
                                std::to_string(p[i]));
            }
            p[i] = 0.0;
        }
    }
    return out;
}

}  // namespace

XrayResult xray(const DenseMatrix& r, std::size_t k) {
    const std::size_t n = r.cols();
    if (k < 1 || k > n) {
        throw DimensionError("xray: k=" + std::to_string(k) + " outside [1, " +
                             std::to_string(n) + "]");
    }

    std::vector<double> col_norm(n);
    for (std::size_t j = 0; j < n; ++j) {
        col_norm[j] = std::sqrt(kern::sum_sq(column_of(r, j).data(), r.rows()));
    }

    // Fixed positive functional for the selection ratio: s = sum of all
    // columns. s^T R(:,j) equals the same quantity on the original matrix
    // (QR preserves inner products), where it is a sum of inner products of
    // nonnegative columns, hence > 0 for every nonzero column. A ratio of
    // linear functionals is maximized at an extreme ray of the column cone,
    // which is what makes the greedy selection recover generators exactly.
    std::vector<double> s(r.rows(), 0.0);
    for (std::size_t i = 0; i < r.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) s[i] += r(i, j);
    }
    std::vector<double> s_dot(n);
    for (std::size_t j = 0; j < n; ++j) {
        s_dot[j] = kern::dot(s.data(), column_of(r, j).data(), r.rows());
    }

    std::vector<std::size_t> selected;
    std::vector<bool> in_k(n, false);
    DenseMatrix h;
    DenseMatrix resid = r;

    auto refit = [&]() {
        DenseMatrix rk = columns_of(r, selected);
        h = DenseMatrix(selected.size(), n);
        for (std::size_t c = 0; c < n; ++c) {
            std::vector<double> rhs = column_of(r, c);
            std::vector<double> coef = nnls(rk, rhs);
            for (std::size_t i = 0; i < selected.size(); ++i) h(i, c) = coef[i];
        }
        resid = r;
        kern::gemm_nn(r.rows(), selected.size(), n, -1.0, rk.data(), rk.cols(), h.data(), n,
                      resid.data(), n);
    };

    for (std::size_t step = 0; step < k; ++step) {
        // Exterior direction: the residual column with the largest norm
        // (ties to the smallest index).
        std::size_t ext = n;
        double ext_norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double nj = kern::sum_sq(column_of(resid, j).data(), r.rows());
            if (nj > ext_norm) {
                ext_norm = nj;
                ext = j;
            }
        }

        std::size_t pick = n;
        if (ext != n) {
            const std::vector<double> p = column_of(resid, ext);
            double best = 0.0;
            bool have = false;
            for (std::size_t j = 0; j < n; ++j) {
                if (in_k[j] || col_norm[j] == 0.0 || s_dot[j] <= 0.0) continue;
                const double score =
                    kern::dot(p.data(), column_of(r, j).data(), r.rows()) / s_dot[j];
                if (!have || score > best) {
                    best = score;
                    pick = j;
                    have = true;
                }
            }
        }
        if (pick == n) {
            // Residual exactly zero (any column keeps the fit exact) or only
            // zero columns remain: smallest index, nonzero columns first.
            for (std::size_t j = 0; j < n && pick == n; ++j) {
                if (!in_k[j] && col_norm[j] > 0.0) pick = j;
            }
            for (std::size_t j = 0; j < n && pick == n; ++j) {
                if (!in_k[j]) pick = j;
            }
        }

        selected.push_back(pick);
        in_k[pick] = true;
        refit();
    }
    return {std::move(selected), std::move(h)};
}

NmfResult nmf(ExecContext& ctx, const DistMatrix& a, std::size_t k, double clamp_eps) {
    const std::size_t n = a.cols();
    if (k < 1 || k > n) {
        throw DimensionError("nmf: k=" + std::to_string(k) + " outside [1, " +
                             std::to_string(n) + "]");
    }

    // One pass: validation and clamping ride along with the local QR.
    DenseMatrix r = detail::tsqr_mapped(ctx, a, [clamp_eps](const RowBlock& blk) {
        return qr_r_factor(clamp_block(blk, clamp_eps));
    });

    XrayResult xr = xray(r, k);

    DenseMatrix rk = columns_of(r, xr.selected);
    DenseMatrix resid = r;
    kern::gemm_nn(r.rows(), k, n, -1.0, rk.data(), k, xr.h.data(), n, resid.data(), n);
    const double rnorm = frobenius_norm(r);

    NmfResult result;
    result.relative_residual = rnorm > 0.0 ? frobenius_norm(resid) / rnorm : 0.0;

    // W = A(:, K), gathered in row order with the same clamping as TSQR saw.
    const std::vector<std::size_t>& sel = xr.selected;
    result.w = detail::gather_stage(ctx, a, k, [&sel, clamp_eps](const RowBlock& blk) {
        DenseMatrix clamped = clamp_block(blk, clamp_eps);
        DenseMatrix piece(clamped.rows(), sel.size());
        for (std::size_t i = 0; i < clamped.rows(); ++i) {
            for (std::size_t j = 0; j < sel.size(); ++j) piece(i, j) = clamped(i, sel[j]);
        }
        return piece;
    });
    result.selected = std::move(xr.selected);
    result.h = std::move(xr.h);
    return result;
}

double nmf_fit_residual(ExecContext& ctx, const DistMatrix& a,
                        const std::vector<std::size_t>& selected, const DenseMatrix& h,
                        double clamp_eps) {
    auto map = [&](const RowBlock& blk) {
        DenseMatrix clamped = clamp_block(blk, clamp_eps);
        DenseMatrix wb(clamped.rows(), selected.size());
        for (std::size_t i = 0; i < clamped.rows(); ++i) {
            for (std::size_t j = 0; j < selected.size(); ++j) {
                wb(i, j) = clamped(i, selected[j]);
            }
        }
        kern::gemm_nn(clamped.rows(), selected.size(), clamped.cols(), -1.0, wb.data(),
                      wb.cols(), h.data(), h.cols(), clamped.data(), clamped.cols());
        return kern::sum_sq(clamped.data(), clamped.size());
    };
    auto combine = [](double x, double y) { return x + y; };
    return std::sqrt(ctx.execute_stage(a, map, combine).first);
}

}  // namespace tsf
