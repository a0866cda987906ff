#include "tsfactor/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tsfactor/errors.hpp"
#include "tsfactor/kernels.hpp"
#include "tsfactor/rng.hpp"

namespace tsf {
namespace {

constexpr std::size_t kQrPanel = 32;

// ---------------------------------------------------------------------------
// Blocked Householder QR. The factored matrix keeps R in its upper triangle
// and the reflector vectors (unit leading entry implicit) below the diagonal.
// Reflectors are built so the R diagonal comes out nonnegative, which pins the
// sign convention without a separate fix-up pass.
// ---------------------------------------------------------------------------

// Householder reflector for the column x[0..len). Writes the scaled reflector
// tail into x[1..len), the new leading value (>= 0) into x[0], returns tau.
double make_reflector(double* x, std::size_t len) {
    const double alpha = x[0];
    const double sigma = len > 1 ? kern::sum_sq(x + 1, len - 1) : 0.0;
    if (sigma == 0.0) {
        if (alpha < 0.0) {
            x[0] = -alpha;  // reflector is the axis flip I - 2 e1 e1^T
            return 2.0;
        }
        return 0.0;
    }
    const double mu = std::sqrt(alpha * alpha + sigma);
    const double v1 = (alpha <= 0.0) ? alpha - mu : -sigma / (alpha + mu);
    const double tau = 2.0 * v1 * v1 / (sigma + v1 * v1);
    kern::scal(1.0 / v1, x + 1, len - 1);
    x[0] = mu;
    return tau;
}

// Applies reflector j of the panel (rows j..m of `a`, vector stored in column
// `col`) to columns [col+1, col_end) of `a`.
void apply_reflector(DenseMatrix& a, std::size_t row0, std::size_t col, double tau,
                     std::size_t col_end, std::vector<double>& w) {
    if (tau == 0.0 || col + 1 >= col_end) return;
    const std::size_t width = col_end - col - 1;
    const std::size_t m = a.rows();
    w.assign(width, 0.0);
    for (std::size_t r = row0; r < m; ++r) {
        const double coef = (r == row0) ? 1.0 : a(r, col);
        kern::axpy(coef, a.row(r) + col + 1, w.data(), width);
    }
    for (std::size_t r = row0; r < m; ++r) {
        const double coef = (r == row0) ? 1.0 : a(r, col);
        kern::axpy(-tau * coef, w.data(), a.row(r) + col + 1, width);
    }
}

// Triangular factor T of the compact WY form for one panel:
// H_0 ... H_{bw-1} = I - V T V^T with T upper triangular.
DenseMatrix form_block_t(const DenseMatrix& a, std::size_t jb, std::size_t bw,
                         const double* taus) {
    DenseMatrix t(bw, bw);
    const std::size_t m = a.rows();
    std::vector<double> g;
    for (std::size_t i = 0; i < bw; ++i) {
        const double tau = taus[i];
        t(i, i) = tau;
        if (i == 0 || tau == 0.0) continue;
        // g = V[:, 0:i]^T v_i over the rows where v_i is nonzero.
        g.assign(i, 0.0);
        for (std::size_t r = jb + i; r < m; ++r) {
            const double coef = (r == jb + i) ? 1.0 : a(r, jb + i);
            kern::axpy(coef, a.row(r) + jb, g.data(), i);
        }
        for (std::size_t p = 0; p < i; ++p) {
            double acc = 0.0;
            for (std::size_t q = p; q < i; ++q) acc += t(p, q) * g[q];
            t(p, i) = -tau * acc;
        }
    }
    return t;
}

// Explicit V for one panel: (m - jb) x bw, unit diagonal, zero above.
DenseMatrix form_block_v(const DenseMatrix& a, std::size_t jb, std::size_t bw) {
    const std::size_t m = a.rows();
    DenseMatrix v(m - jb, bw);
    for (std::size_t j = 0; j < bw; ++j) {
        v(j, j) = 1.0;
        for (std::size_t r = jb + j + 1; r < m; ++r) v(r - jb, j) = a(r, jb + j);
    }
    return v;
}

struct QrFactorization {
    DenseMatrix a;                   // packed R + reflectors
    std::vector<double> taus;        // one per eliminated column
    std::vector<std::size_t> panel_starts;
    std::vector<DenseMatrix> block_t;  // retained only when Q is wanted
};

QrFactorization factor_qr(const DenseMatrix& m, bool keep_blocks) {
    QrFactorization f;
    f.a = m;
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    const std::size_t ncol = std::min(rows, cols);
    f.taus.assign(ncol, 0.0);

    std::vector<double> w;
    for (std::size_t jb = 0; jb < ncol; jb += kQrPanel) {
        const std::size_t bw = std::min(kQrPanel, ncol - jb);
        for (std::size_t j = 0; j < bw; ++j) {
            const std::size_t col = jb + j;
            // Column col, rows col..rows, lives strided; gather, reflect, scatter.
            std::vector<double> x(rows - col);
            for (std::size_t r = col; r < rows; ++r) x[r - col] = f.a(r, col);
            const double tau = make_reflector(x.data(), x.size());
            for (std::size_t r = col; r < rows; ++r) f.a(r, col) = x[r - col];
            f.taus[col] = tau;
            apply_reflector(f.a, col, col, tau, jb + bw, w);
        }
        DenseMatrix t = form_block_t(f.a, jb, bw, f.taus.data() + jb);
        if (jb + bw < cols) {
            // Trailing update: C <- C - V (T^T (V^T C)).
            DenseMatrix v = form_block_v(f.a, jb, bw);
            const std::size_t mp = rows - jb;
            const std::size_t nc = cols - jb - bw;
            DenseMatrix wt(bw, nc);
            double* cptr = f.a.row(jb) + jb + bw;
            kern::gemm_tn(mp, bw, nc, 1.0, v.data(), bw, cptr, cols, wt.data(), nc);
            // wt <- T^T wt, processed top row last so originals stay available.
            for (std::size_t i = bw; i-- > 0;) {
                kern::scal(t(i, i), wt.row(i), nc);
                for (std::size_t p = 0; p < i; ++p) {
                    kern::axpy(t(p, i), wt.row(p), wt.row(i), nc);
                }
            }
            kern::gemm_nn(mp, bw, nc, -1.0, v.data(), bw, wt.data(), nc, cptr, cols);
        }
        f.panel_starts.push_back(jb);
        if (keep_blocks) f.block_t.push_back(std::move(t));
    }
    return f;
}

DenseMatrix extract_r(const QrFactorization& f, std::size_t rows, std::size_t cols) {
    const std::size_t ncol = std::min(rows, cols);
    DenseMatrix r(ncol, cols);
    for (std::size_t i = 0; i < ncol; ++i) {
        for (std::size_t j = i; j < cols; ++j) r(i, j) = f.a(i, j);
    }
    return r;
}

DenseMatrix form_thin_q(const QrFactorization& f, std::size_t rows, std::size_t cols) {
    const std::size_t ncol = std::min(rows, cols);
    DenseMatrix q(rows, ncol);
    for (std::size_t j = 0; j < ncol; ++j) q(j, j) = 1.0;
    for (std::size_t b = f.panel_starts.size(); b-- > 0;) {
        const std::size_t jb = f.panel_starts[b];
        const std::size_t bw = std::min(kQrPanel, ncol - jb);
        const DenseMatrix& t = f.block_t[b];
        DenseMatrix v = form_block_v(f.a, jb, bw);
        const std::size_t mp = rows - jb;
        DenseMatrix wt(bw, ncol);
        double* qptr = q.row(jb);
        kern::gemm_tn(mp, bw, ncol, 1.0, v.data(), bw, qptr, ncol, wt.data(), ncol);
        // wt <- T wt, processed bottom row last.
        for (std::size_t i = 0; i < bw; ++i) {
            kern::scal(t(i, i), wt.row(i), ncol);
            for (std::size_t p = i + 1; p < bw; ++p) {
                kern::axpy(t(i, p), wt.row(p), wt.row(i), ncol);
            }
        }
        kern::gemm_nn(mp, bw, ncol, -1.0, v.data(), bw, wt.data(), ncol, qptr, ncol);
    }
    return q;
}

}  // namespace

QrResult thin_qr(const DenseMatrix& m) {
    if (m.rows() < m.cols()) {
        throw DimensionError("thin_qr: rows (" + std::to_string(m.rows()) +
                             ") < cols (" + std::to_string(m.cols()) + ")");
    }
    QrFactorization f = factor_qr(m, true);
    QrResult out;
    out.r = extract_r(f, m.rows(), m.cols());
    out.q = form_thin_q(f, m.rows(), m.cols());
    return out;
}

DenseMatrix qr_r_factor(const DenseMatrix& m) {
    QrFactorization f = factor_qr(m, false);
    return extract_r(f, m.rows(), m.cols());
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD on columns: orthogonalize column pairs with plane
// rotations until every pair is numerically orthogonal. Singular values come
// out as column norms, so small values keep high relative accuracy.
// ---------------------------------------------------------------------------

namespace {

constexpr double kJacobiTol = 1e-14;
constexpr int kJacobiMaxSweeps = 60;

void svd_sign_fix(DenseMatrix& u, DenseMatrix& v) {
    for (std::size_t j = 0; j < v.cols(); ++j) {
        double lead = 0.0;
        for (std::size_t i = 0; i < v.rows(); ++i) {
            if (v(i, j) != 0.0) {
                lead = v(i, j);
                break;
            }
        }
        if (lead < 0.0) {
            for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
            for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
        }
    }
}

// Orthonormal fill for exactly-zero singular directions.
void complete_basis(std::vector<double*> cols, std::size_t rows,
                    const std::vector<std::size_t>& need,
                    const std::vector<std::size_t>& have) {
    std::vector<double> w(rows);
    std::size_t candidate = 0;
    std::vector<std::size_t> placed = have;
    for (std::size_t slot : need) {
        for (; candidate < rows; ++candidate) {
            std::fill(w.begin(), w.end(), 0.0);
            w[candidate] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t p : placed) {
                    const double proj = kern::dot(cols[p], w.data(), rows);
                    kern::axpy(-proj, cols[p], w.data(), rows);
                }
            }
            const double norm = std::sqrt(kern::sum_sq(w.data(), rows));
            if (norm > 0.5) {
                kern::scal(1.0 / norm, w.data(), rows);
                std::copy(w.begin(), w.end(), cols[slot]);
                placed.push_back(slot);
                ++candidate;
                break;
            }
        }
    }
}

}  // namespace

SpectralFactors thin_svd(const DenseMatrix& m) {
    if (m.rows() < m.cols()) {
        SpectralFactors f = thin_svd(transpose(m));
        return {std::move(f.v), std::move(f.sigma), std::move(f.u)};
    }
    const std::size_t rows = m.rows();
    const std::size_t n = m.cols();

    // Column-major working copies so rotations touch contiguous memory.
    std::vector<double> g(rows * n);
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j * rows + i] = m(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

    auto gcol = [&](std::size_t j) { return g.data() + j * rows; };
    auto vcol = [&](std::size_t j) { return v.data() + j * n; };

    std::vector<double> norms(n);
    for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
        for (std::size_t j = 0; j < n; ++j) norms[j] = kern::sum_sq(gcol(j), rows);
        std::size_t rotations = 0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double a = norms[p];
                const double b = norms[q];
                if (a == 0.0 || b == 0.0) continue;
                const double c = kern::dot(gcol(p), gcol(q), rows);
                if (std::abs(c) <= kJacobiTol * std::sqrt(a * b)) continue;
                ++rotations;
                const double zeta = (b - a) / (2.0 * c);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                double* gp = gcol(p);
                double* gq = gcol(q);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double xp = gp[i];
                    const double xq = gq[i];
                    gp[i] = cs * xp - sn * xq;
                    gq[i] = sn * xp + cs * xq;
                }
                double* vp = vcol(p);
                double* vq = vcol(q);
                for (std::size_t i = 0; i < n; ++i) {
                    const double xp = vp[i];
                    const double xq = vq[i];
                    vp[i] = cs * xp - sn * xq;
                    vq[i] = sn * xp + cs * xq;
                }
                norms[p] = a - t * c;
                norms[q] = b + t * c;
            }
        }
        if (rotations == 0) break;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(kern::sum_sq(gcol(j), rows));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SpectralFactors out;
    out.sigma.resize(n);
    out.u = DenseMatrix(rows, n);
    out.v = DenseMatrix(n, n);
    std::vector<std::vector<double>> ucols(n, std::vector<double>(rows, 0.0));
    std::vector<std::size_t> nonzero;
    std::vector<std::size_t> zero_slots;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.sigma[j] = norms[src];
        if (norms[src] > 0.0) {
            const double inv = 1.0 / norms[src];
            for (std::size_t i = 0; i < rows; ++i) ucols[j][i] = gcol(src)[i] * inv;
            nonzero.push_back(j);
        } else {
            zero_slots.push_back(j);
        }
        for (std::size_t i = 0; i < n; ++i) out.v(i, j) = vcol(src)[i];
    }
    if (!zero_slots.empty()) {
        std::vector<double*> ptrs(n);
        for (std::size_t j = 0; j < n; ++j) ptrs[j] = ucols[j].data();
        complete_basis(ptrs, rows, zero_slots, nonzero);
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < rows; ++i) out.u(i, j) = ucols[j][i];
    }
    svd_sign_fix(out.u, out.v);
    return out;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi for small dense symmetric matrices (Rayleigh-Ritz systems).
// ---------------------------------------------------------------------------

namespace detail {

void jacobi_eigh(const DenseMatrix& s, std::vector<double>& values, DenseMatrix& vectors) {
    const std::size_t n = s.rows();
    if (s.cols() != n) throw DimensionError("jacobi_eigh: matrix not square");
    DenseMatrix a = s;
    DenseMatrix v = DenseMatrix::identity(n);

    for (int sweep = 0; sweep < 100; ++sweep) {
        std::size_t rotations = 0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double scale = std::abs(app) + std::abs(aqq);
                if (std::abs(apq) <= 1e-15 * scale || apq == 0.0) continue;
                ++rotations;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = cs * aip - sn * aiq;
                    a(i, q) = sn * aip + cs * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = cs * api - sn * aqi;
                    a(q, i) = sn * api + cs * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = cs * vip - sn * viq;
                    v(i, q) = sn * vip + cs * viq;
                }
            }
        }
        if (rotations == 0) break;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    values.resize(n);
    vectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) vectors(i, j) = v(i, order[j]);
    }
    // Deterministic signs: first nonzero entry of each vector positive.
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (vectors(i, j) != 0.0) {
                if (vectors(i, j) < 0.0) {
                    for (std::size_t r = 0; r < n; ++r) vectors(r, j) = -vectors(r, j);
                }
                break;
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lanczos with full reorthogonalization and thick restarts. The projected
// matrix is kept dense so reorthogonalization corrections and restart coupling
// land in it naturally; only the newest basis vector ever carries residual
// outside the span, which keeps the classic beta * |u_last| estimate exact.
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kEigsSeed = 0x7453466163746f72ull;

}  // namespace

EigsResult symmetric_eigs(const LinearOp& op, std::size_t n, std::size_t k, double tol,
                          std::size_t max_iters) {
    if (k < 1 || k > n) {
        throw DimensionError("symmetric_eigs: k=" + std::to_string(k) + " outside [1, " +
                             std::to_string(n) + "]");
    }
    const bool fixed_budget = !(tol > 0.0);
    const std::size_t cap = std::min(n, std::max(3 * k + 12, std::size_t{30}));

    std::vector<std::vector<double>> basis;  // orthonormal columns
    DenseMatrix h(cap, cap);
    std::size_t completed = 0;  // columns of h that are filled
    double out_res = 0.0;       // out-of-span residual of the last completed column
    std::size_t ops = 0;
    std::size_t fresh_counter = 0;

    std::vector<double> w(n), coeffs, stash;
    EigsResult result;

    auto orthogonalize = [&](std::vector<double>& vec, std::vector<double>* proj) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < basis.size(); ++i) {
                const double c = kern::dot(basis[i].data(), vec.data(), n);
                kern::axpy(-c, basis[i].data(), vec.data(), n);
                if (proj) (*proj)[i] += c;
            }
        }
    };

    auto push_fresh = [&]() -> bool {
        std::vector<double> vec(n);
        for (std::size_t attempt = 0; attempt < n + 8; ++attempt) {
            for (std::size_t i = 0; i < n; ++i) {
                vec[i] = rng::gaussian(kEigsSeed, rng::kEigsStart, fresh_counter * n + i);
            }
            ++fresh_counter;
            orthogonalize(vec, nullptr);
            const double norm = std::sqrt(kern::sum_sq(vec.data(), n));
            if (norm > 1e-8) {
                kern::scal(1.0 / norm, vec.data(), n);
                basis.push_back(std::move(vec));
                return true;
            }
        }
        return false;
    };

    push_fresh();

    std::vector<double> theta;
    DenseMatrix ritz;
    while (true) {
        if (basis.size() == completed) {
            // No pending direction: restart stash, then fresh vectors.
            if (!stash.empty()) {
                basis.push_back(std::move(stash));
                stash.clear();
            } else if (basis.size() >= n || !push_fresh()) {
                break;  // whole space spanned; Rayleigh-Ritz below is exact
            }
        }

        // Expand: apply the operator to the newest basis vector.
        op(std::span<const double>(basis[completed]), std::span<double>(w));
        ++ops;
        coeffs.assign(basis.size(), 0.0);
        orthogonalize(w, &coeffs);
        for (std::size_t i = 0; i <= completed; ++i) {
            h(i, completed) = coeffs[i];
            h(completed, i) = coeffs[i];
        }
        ++completed;
        const double beta = std::sqrt(kern::sum_sq(w.data(), n));
        double hscale = 0.0;
        for (std::size_t i = 0; i < completed; ++i) hscale = std::max(hscale, std::abs(h(i, i)));
        if (beta > 1e-13 * std::max(hscale, 1e-300)) {
            kern::scal(1.0 / beta, w.data(), n);
            if (basis.size() < cap) {
                basis.push_back(w);
            } else {
                stash = w;  // survives the upcoming restart as the next direction
            }
            out_res = beta;
        } else {
            out_res = 0.0;
        }

        if (completed < k) continue;

        // Rayleigh-Ritz on the completed block.
        DenseMatrix hsub(completed, completed);
        for (std::size_t i = 0; i < completed; ++i) {
            for (std::size_t j = 0; j < completed; ++j) hsub(i, j) = h(i, j);
        }
        detail::jacobi_eigh(hsub, theta, ritz);

        std::vector<double> residuals(k);
        for (std::size_t i = 0; i < k; ++i) {
            residuals[i] = out_res * std::abs(ritz(completed - 1, i));
        }
        result.history.push_back({ops, residuals});
        const double lambda_max = theta.empty() ? 0.0 : std::max(theta[0], 0.0);

        const bool space_exhausted = basis.size() == completed && stash.empty() &&
                                     (completed >= n);
        bool candidate = false;
        if (!fixed_budget) {
            candidate = true;
            for (std::size_t i = 0; i < k; ++i) {
                if (residuals[i] > tol * lambda_max) candidate = false;
            }
            if (space_exhausted) candidate = true;
        } else if (ops >= max_iters || space_exhausted) {
            candidate = true;
        }

        if (candidate) {
            // Assemble Ritz vectors for the wanted pairs.
            DenseMatrix vectors(n, k);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t j = 0; j < k; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < completed; ++i) {
                        acc += basis[i][r] * ritz(i, j);
                    }
                    vectors(r, j) = acc;
                }
            }
            bool accept = true;
            std::vector<double> verified(k, 0.0);
            if (!fixed_budget && !space_exhausted) {
                // Explicit residual check before declaring victory.
                std::vector<double> y(n), r(n);
                for (std::size_t j = 0; j < k && accept; ++j) {
                    for (std::size_t i = 0; i < n; ++i) y[i] = vectors(i, j);
                    op(std::span<const double>(y), std::span<double>(r));
                    ++ops;
                    kern::axpy(-theta[j], y.data(), r.data(), n);
                    verified[j] = std::sqrt(kern::sum_sq(r.data(), n));
                    if (verified[j] > tol * std::max(lambda_max, 1e-300)) accept = false;
                }
                if (!accept) result.history.push_back({ops, verified});
            }
            if (accept || fixed_budget || space_exhausted) {
                result.values.assign(theta.begin(), theta.begin() + k);
                // Sign convention: first nonzero component positive.
                for (std::size_t j = 0; j < k; ++j) {
                    for (std::size_t i = 0; i < n; ++i) {
                        if (vectors(i, j) != 0.0) {
                            if (vectors(i, j) < 0.0) {
                                for (std::size_t r2 = 0; r2 < n; ++r2) {
                                    vectors(r2, j) = -vectors(r2, j);
                                }
                            }
                            break;
                        }
                    }
                }
                result.vectors = std::move(vectors);
                result.op_applications = ops;
                return result;
            }
        }

        if (!fixed_budget && ops >= max_iters) {
            throw ConvergenceError(
                "symmetric_eigs: no convergence within " + std::to_string(max_iters) +
                    " operator applications (best residuals attached)",
                residuals);
        }

        // Thick restart when the basis is full.
        if (completed == cap) {
            const std::size_t keep =
                std::max(k, std::min(k + 5, cap >= 3 ? cap - 2 : k));
            std::vector<std::vector<double>> retained(keep, std::vector<double>(n, 0.0));
            for (std::size_t j = 0; j < keep; ++j) {
                for (std::size_t r = 0; r < n; ++r) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < completed; ++i) {
                        acc += basis[i][r] * ritz(i, j);
                    }
                    retained[j][r] = acc;
                }
            }
            basis = std::move(retained);
            // Re-orthonormalize to stop drift across restarts.
            for (std::size_t j = 0; j < basis.size(); ++j) {
                for (int pass = 0; pass < 2; ++pass) {
                    for (std::size_t i = 0; i < j; ++i) {
                        const double c = kern::dot(basis[i].data(), basis[j].data(), n);
                        kern::axpy(-c, basis[i].data(), basis[j].data(), n);
                    }
                }
                const double norm = std::sqrt(kern::sum_sq(basis[j].data(), n));
                if (norm > 0.0) kern::scal(1.0 / norm, basis[j].data(), n);
            }
            h = DenseMatrix(cap, cap);
            for (std::size_t j = 0; j < keep; ++j) h(j, j) = theta[j];
            completed = keep;
            if (!stash.empty()) {
                // Stash is orthogonal to the old span, hence to the retained
                // vectors; refresh the orthogonalization anyway.
                std::vector<double> pend = std::move(stash);
                stash.clear();
                orthogonalize(pend, nullptr);
                const double norm = std::sqrt(kern::sum_sq(pend.data(), n));
                if (norm > 1e-10) {
                    kern::scal(1.0 / norm, pend.data(), n);
                    basis.push_back(std::move(pend));
                }
            }
            out_res = 0.0;
        }
    }

    // Space exhausted without hitting the return path above (tiny systems).
    throw ConvergenceError("symmetric_eigs: failed to build a usable basis", {});
}

// ---------------------------------------------------------------------------
// Lawson-Hanson active set NNLS.
// ---------------------------------------------------------------------------

std::vector<double> nnls(const DenseMatrix& m, std::span<const double> b) {
    const std::size_t rows = m.rows();
    const std::size_t n = m.cols();
    if (rows != b.size()) {
        throw DimensionError("nnls: rows (" + std::to_string(rows) + ") != len(b) (" +
                             std::to_string(b.size()) + ")");
    }
    std::vector<double> x(n, 0.0);
    if (n == 0) return x;

    std::vector<bool> passive(n, false);
    std::vector<double> resid(b.begin(), b.end());  // b - Mx
    std::vector<double> w(n, 0.0);

    auto refresh_gradient = [&]() {
        std::fill(resid.begin(), resid.end(), 0.0);
        kern::gemm_nn(rows, n, 1, -1.0, m.data(), n, x.data(), 1, resid.data(), 1);
        kern::add(b.data(), resid.data(), rows);
        std::fill(w.begin(), w.end(), 0.0);
        kern::gemm_tn(rows, n, 1, 1.0, m.data(), n, resid.data(), 1, w.data(), 1);
    };
    refresh_gradient();

    double scale = 0.0;
    for (double wi : w) scale = std::max(scale, std::abs(wi));
    if (scale == 0.0) return x;  // zero matrix or b orthogonal to range
    const double tol_w = 1e-12 * scale;

    auto solve_passive = [&](const std::vector<std::size_t>& idx) {
        DenseMatrix mp(rows, idx.size());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < idx.size(); ++j) mp(r, j) = m(r, idx[j]);
        }
        DenseMatrix rhs(rows, 1);
        for (std::size_t r = 0; r < rows; ++r) rhs(r, 0) = b[r];
        DenseMatrix z = least_squares(mp, rhs);
        std::vector<double> out(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) out[j] = z(j, 0);
        return out;
    };

    const std::size_t outer_cap = 4 * n + 16;
    for (std::size_t outer = 0; outer < outer_cap; ++outer) {
        // Most-violated inactive coordinate.
        double wmax = tol_w;
        std::size_t pick = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (!passive[j] && w[j] > wmax) {
                wmax = w[j];
                pick = j;
            }
        }
        if (pick == n) break;
        passive[pick] = true;

        for (std::size_t inner = 0; inner <= n; ++inner) {
            std::vector<std::size_t> idx;
            for (std::size_t j = 0; j < n; ++j) {
                if (passive[j]) idx.push_back(j);
            }
            std::vector<double> z = solve_passive(idx);
            bool feasible = true;
            for (double zj : z) {
                if (zj <= 0.0) feasible = false;
            }
            if (feasible) {
                for (std::size_t j = 0; j < idx.size(); ++j) x[idx[j]] = z[j];
                break;
            }
            // Step to the boundary and drop the coordinates that hit it.
            double alpha = 1.0;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                if (z[j] <= 0.0) {
                    const double denom = x[idx[j]] - z[j];
                    const double cand = denom > 0.0 ? x[idx[j]] / denom : 0.0;
                    alpha = std::min(alpha, cand);
                }
            }
            double xmax = 0.0;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                x[idx[j]] += alpha * (z[j] - x[idx[j]]);
                xmax = std::max(xmax, x[idx[j]]);
            }
            for (std::size_t j = 0; j < idx.size(); ++j) {
                if (z[j] <= 0.0 && x[idx[j]] <= 1e-13 * std::max(xmax, 1.0)) {
                    x[idx[j]] = 0.0;
                    passive[idx[j]] = false;
                }
            }
        }
        refresh_gradient();
    }
    return x;
}

DenseMatrix least_squares(const DenseMatrix& c, const DenseMatrix& a) {
    if (c.rows() != a.rows()) {
        throw DimensionError("least_squares: C rows (" + std::to_string(c.rows()) +
                             ") != A rows (" + std::to_string(a.rows()) + ")");
    }
    const std::size_t k = c.cols();
    const std::size_t n = a.cols();
    if (k == 0) return DenseMatrix(0, n);

    SpectralFactors f = thin_svd(c);
    const double cutoff = f.sigma.empty() ? 0.0 : f.sigma[0] * 1e-12;
    // T = U^T A, rows scaled by 1/sigma where sigma clears the rank cutoff.
    DenseMatrix t(f.sigma.size(), n);
    kern::gemm_tn(c.rows(), f.sigma.size(), n, 1.0, f.u.data(), f.u.cols(), a.data(), n,
                  t.data(), n);
    for (std::size_t i = 0; i < f.sigma.size(); ++i) {
        const double s = f.sigma[i] > cutoff ? 1.0 / f.sigma[i] : 0.0;
        kern::scal(s, t.row(i), n);
    }
    DenseMatrix x(k, n);
    kern::gemm_nn(k, f.sigma.size(), n, 1.0, f.v.data(), f.v.cols(), t.data(), n, x.data(), n);
    return x;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()));
    }
    DenseMatrix c(a.rows(), b.cols());
    kern::gemm_nn(a.rows(), a.cols(), b.cols(), 1.0, a.data(), a.cols(), b.data(), b.cols(),
                  c.data(), c.cols());
    return c;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_at_b: row counts " + std::to_string(a.rows()) + " vs " +
                             std::to_string(b.rows()));
    }
    DenseMatrix c(a.cols(), b.cols());
    kern::gemm_tn(a.rows(), a.cols(), b.cols(), 1.0, a.data(), a.cols(), b.data(), b.cols(),
                  c.data(), c.cols());
    return c;
}

}  // namespace tsf
