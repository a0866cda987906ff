#include "tsfactor/dist_kernels.hpp"

#include <algorithm>

#include "tsfactor/kernels.hpp"

namespace tsf {

DenseMatrix multiply_gramian(ExecContext& ctx, const DistMatrix& a, const DenseMatrix& b) {
    if (b.rows() != a.cols()) {
        throw DimensionError("multiply_gramian: B has " + std::to_string(b.rows()) +
                             " rows, A has " + std::to_string(a.cols()) + " cols");
    }
    const std::size_t n = a.cols();
    const std::size_t s = b.cols();
    auto map = [&b, n, s](const RowBlock& blk) {
        const std::size_t rows = blk.data.rows();
        DenseMatrix y(rows, s);
        kern::gemm_nn(rows, n, s, 1.0, blk.data.data(), n, b.data(), s, y.data(), s);
        DenseMatrix g(n, s);
        kern::gemm_tn(rows, n, s, 1.0, blk.data.data(), n, y.data(), s, g.data(), s);
        return g;
    };
    auto combine = [](DenseMatrix x, DenseMatrix y) {
        kern::add(y.data(), x.data(), x.size());
        return x;
    };
    return ctx.execute_stage(a, map, combine).first;
}

namespace detail {

namespace {

struct Piece {
    std::size_t row_offset;
    DenseMatrix data;
};

std::vector<Piece> merge_pieces(std::vector<Piece> x, std::vector<Piece> y) {
    std::vector<Piece> out;
    out.reserve(x.size() + y.size());
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
        if (x[i].row_offset < y[j].row_offset) {
            out.push_back(std::move(x[i++]));
        } else {
            out.push_back(std::move(y[j++]));
        }
    }
    while (i < x.size()) out.push_back(std::move(x[i++]));
    while (j < y.size()) out.push_back(std::move(y[j++]));
    return out;
}

}  // namespace

DenseMatrix gather_stage(ExecContext& ctx, const DistMatrix& a, std::size_t out_cols,
                         const std::function<DenseMatrix(const RowBlock&)>& piece) {
    auto map = [&piece](const RowBlock& blk) {
        std::vector<Piece> v;
        v.push_back({blk.row_offset, piece(blk)});
        return v;
    };
    auto [pieces, metrics] = ctx.execute_stage(a, map, merge_pieces);
    (void)metrics;
    DenseMatrix out(a.global_rows(), out_cols);
    for (const Piece& p : pieces) {
        std::copy(p.data.data(), p.data.data() + p.data.size(), out.row(p.row_offset));
    }
    return out;
}

DenseMatrix tsqr_mapped(ExecContext& ctx, const DistMatrix& a,
                        const std::function<DenseMatrix(const RowBlock&)>& local_r) {
    const std::size_t n = a.cols();
    if (n > a.global_rows()) {
        throw DimensionError("tsqr: cols (" + std::to_string(n) + ") exceed global rows (" +
                             std::to_string(a.global_rows()) + ")");
    }
    auto combine = [](DenseMatrix r1, DenseMatrix r2) {
        DenseMatrix stacked(r1.rows() + r2.rows(), r1.cols());
        std::copy(r1.data(), r1.data() + r1.size(), stacked.data());
        std::copy(r2.data(), r2.data() + r2.size(), stacked.data() + r1.size());
        return qr_r_factor(stacked);
    };
    return ctx.execute_stage(a, local_r, combine).first;
}

}  // namespace detail

DenseMatrix multiply_collect(ExecContext& ctx, const DistMatrix& a, const DenseMatrix& b) {
    if (b.rows() != a.cols()) {
        throw DimensionError("multiply_collect: B has " + std::to_string(b.rows()) +
                             " rows, A has " + std::to_string(a.cols()) + " cols");
    }
    const std::size_t s = b.cols();
    return detail::gather_stage(ctx, a, s, [&b, s](const RowBlock& blk) {
        DenseMatrix y(blk.data.rows(), s);
        kern::gemm_nn(blk.data.rows(), blk.data.cols(), s, 1.0, blk.data.data(),
                      blk.data.cols(), b.data(), s, y.data(), s);
        return y;
    });
}

DenseMatrix tsqr(ExecContext& ctx, const DistMatrix& a) {
    return detail::tsqr_mapped(ctx, a,
                               [](const RowBlock& blk) { return qr_r_factor(blk.data); });
}

}  // namespace tsf
