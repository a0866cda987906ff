#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "tsfactor/errors.hpp"
#include "tsfactor/linalg.hpp"
#include "tsfactor/pca.hpp"

using tsf::DenseMatrix;
using tsf::DistMatrix;
using tsf::ExecContext;
using tsf::RunConfig;

namespace {

ExecContext make_ctx(std::size_t partitions) {
    RunConfig c;
    c.executors = 2;
    c.slots_per_executor = 2;
    c.partitions = partitions;
    return ExecContext(c);
}

DenseMatrix centered(const DenseMatrix& m) {
    DenseMatrix out = m;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
        mean /= static_cast<double>(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) -= mean;
    }
    return out;
}

double rank_k_residual(const DenseMatrix& m, const tsf::SpectralFactors& f, std::size_t k) {
    DenseMatrix us(f.u.rows(), k);
    for (std::size_t i = 0; i < f.u.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) us(i, j) = f.u(i, j) * f.sigma[j];
    }
    DenseMatrix vk(f.v.rows(), k);
    for (std::size_t i = 0; i < f.v.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) vk(i, j) = f.v(i, j);
    }
    DenseMatrix rec = tsf::matmul(us, tsf::transpose(vk));
    double acc = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double d = rec.data()[i] - m.data()[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

// ------------------------------------------------------------ column means

TEST_CASE("column_means of a small matrix") {
    ExecContext ctx = make_ctx(2);
    DenseMatrix m(2, 2, {1, 2, 3, 4});
    auto mu = tsf::column_means(ctx, tsf::partition(m, 2));
    CHECK(mu[0] == doctest::Approx(2.0));
    CHECK(mu[1] == doctest::Approx(3.0));
}

TEST_CASE("column_means of the zero matrix is zero") {
    ExecContext ctx = make_ctx(3);
    auto mu = tsf::column_means(ctx, tsf::partition(DenseMatrix(9, 4), 3));
    for (double v : mu) CHECK(v == 0.0);
}

TEST_CASE("column_means matches the dense mean oracle") {
    ExecContext ctx = make_ctx(7);
    DenseMatrix m = oracle::gaussian_matrix(100, 7, 21);
    auto mu = tsf::column_means(ctx, tsf::partition(m, 7));
    for (std::size_t j = 0; j < 7; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 100; ++i) mean += m(i, j);
        mean /= 100.0;
        CHECK(std::abs(mu[j] - mean) < 1e-12);
    }
}

// -------------------------------------------------------------------- pca

TEST_CASE("pca of a centered four-row matrix finds sigma = 2 sqrt 2") {
    ExecContext ctx = make_ctx(2);
    DenseMatrix m(4, 2, {1, 0, -1, 0, 0, 2, 0, -2});
    auto r = tsf::pca(ctx, tsf::partition(m, 2), 1, /*center=*/false, 1e-10, 200);
    CHECK(r.factors.sigma[0] == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK(std::abs(std::abs(r.factors.v(1, 0)) - 1.0) < 1e-9);
    CHECK(std::abs(r.factors.v(0, 0)) < 1e-9);
}

TEST_CASE("a constant column contributes singular value zero when centered") {
    ExecContext ctx = make_ctx(3);
    DenseMatrix m = oracle::gaussian_matrix(30, 3, 22);
    for (std::size_t i = 0; i < 30; ++i) m(i, 1) = 5.0;
    auto r = tsf::pca(ctx, tsf::partition(m, 3), 3, /*center=*/true, 1e-10, 300);
    CHECK(r.factors.sigma[2] <= 1e-8 * std::max(r.factors.sigma[0], 1.0));
    CHECK(r.centered);
    CHECK(r.column_means[1] == doctest::Approx(5.0));
}

TEST_CASE("pca matches the dense centered SVD oracle") {
    DenseMatrix m = oracle::gaussian_matrix(200, 20, 23);
    ExecContext ctx = make_ctx(4);
    auto r = tsf::pca(ctx, tsf::partition(m, 4), 5, /*center=*/true, 1e-10, 400);

    auto dense = tsf::thin_svd(centered(m));
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(r.factors.sigma[i] - dense.sigma[i]) < 1e-8 * dense.sigma[0]);
    }
    // V agrees up to column sign.
    for (std::size_t j = 0; j < 5; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < 20; ++i) dot += r.factors.v(i, j) * dense.v(i, j);
        CHECK(std::abs(std::abs(dot) - 1.0) < 1e-6);
    }
    // U and V orthonormal.
    DenseMatrix gu = tsf::matmul_at_b(r.factors.u, r.factors.u);
    DenseMatrix gv = tsf::matmul_at_b(r.factors.v, r.factors.v);
    CHECK(oracle::max_abs_diff(gu, DenseMatrix::identity(5)) < 1e-10);
    CHECK(oracle::max_abs_diff(gv, DenseMatrix::identity(5)) < 1e-10);
}

TEST_CASE("pca residual matches the best rank-k error") {
    DenseMatrix m = oracle::gaussian_matrix(150, 12, 30);
    DenseMatrix mc = centered(m);
    auto tail_sigma = oracle::singular_values(mc);
    ExecContext ctx = make_ctx(4);
    auto r = tsf::pca(ctx, tsf::partition(m, 4), 4, /*center=*/true, 1e-10, 400);
    double best = 0.0;
    for (std::size_t i = 4; i < tail_sigma.size(); ++i) best += tail_sigma[i] * tail_sigma[i];
    best = std::sqrt(best);
    const double resid = rank_k_residual(mc, r.factors, 4);
    CHECK(resid <= best * (1.0 + 1e-7) + 1e-10);
    CHECK(resid >= best * (1.0 - 1e-7) - 1e-10);
}

TEST_CASE("spectrum capture improves monotonically with k") {
    DenseMatrix m = oracle::gaussian_matrix(100, 10, 24);
    DenseMatrix mc = centered(m);
    double prev = 1e300;
    for (std::size_t k = 1; k <= 5; ++k) {
        ExecContext ctx = make_ctx(4);
        auto r = tsf::pca(ctx, tsf::partition(m, 4), k, /*center=*/true, 1e-10, 400);
        const double resid = rank_k_residual(mc, r.factors, k);
        CHECK(resid <= prev + 1e-9);
        prev = resid;
    }
}

TEST_CASE("implicit centering equals explicit centering") {
    DenseMatrix m = oracle::uniform_matrix(60, 8, 25, -1.0, 3.0);
    ExecContext ctx1 = make_ctx(4);
    auto implicit_r = tsf::pca(ctx1, tsf::partition(m, 4), 3, /*center=*/true, 1e-10, 300);
    ExecContext ctx2 = make_ctx(4);
    auto explicit_r =
        tsf::pca(ctx2, tsf::partition(centered(m), 4), 3, /*center=*/false, 1e-10, 300);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(implicit_r.factors.sigma[i] - explicit_r.factors.sigma[i]) <
              1e-8 * explicit_r.factors.sigma[0]);
    }
}

TEST_CASE("uncentered pca is the truncated SVD") {
    DenseMatrix m = oracle::gaussian_matrix(80, 9, 26);
    ExecContext ctx = make_ctx(4);
    auto r = tsf::pca(ctx, tsf::partition(m, 4), 4, /*center=*/false, 1e-10, 300);
    auto dense = tsf::thin_svd(m);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::abs(r.factors.sigma[i] - dense.sigma[i]) < 1e-8 * dense.sigma[0]);
    }
    CHECK_FALSE(r.centered);
    for (double v : r.column_means) CHECK(v == 0.0);
}

TEST_CASE("pca validates k") {
    ExecContext ctx = make_ctx(2);
    DistMatrix a = tsf::partition(oracle::gaussian_matrix(10, 4, 27), 2);
    CHECK_THROWS_AS((void)tsf::pca(ctx, a, 0, false, 1e-8, 100), tsf::DimensionError);
    CHECK_THROWS_AS((void)tsf::pca(ctx, a, 5, false, 1e-8, 100), tsf::DimensionError);
}

TEST_CASE("fixed-iteration mode uses exactly the requested budget") {
    // Budget below the 12-dimensional exhaustion point, so the count is exact.
    DenseMatrix m = oracle::gaussian_matrix(50, 12, 28);
    ExecContext ctx = make_ctx(2);
    auto r = tsf::pca(ctx, tsf::partition(m, 2), 3, /*center=*/false, 0.0, 10);
    CHECK(r.iterations_used == 10);
    CHECK(!r.eig_history.empty());
}

TEST_CASE("each eigensolver operator application is one stage") {
    DenseMatrix m = oracle::gaussian_matrix(60, 6, 29);
    ExecContext ctx = make_ctx(3);
    auto r = tsf::pca(ctx, tsf::partition(m, 3), 2, /*center=*/false, 1e-8, 300);
    // Stages: one per operator application plus the final collect.
    CHECK(ctx.stages_executed() == r.iterations_used + 1);
}
