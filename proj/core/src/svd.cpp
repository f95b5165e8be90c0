#include "cg/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cg/errors.hpp"

namespace cg {

namespace {

// One-sided Jacobi on the columns of b (n x m, n >= m). Plane rotations are
// applied until all column pairs are orthogonal to working precision; the
// same rotations accumulate into v. Afterwards the column norms of b are the
// singular values and the normalized columns form u.
void jacobi_orthogonalize(Matrix& b, Matrix& v) {
    const std::size_t n = b.rows();
    const std::size_t m = b.cols();
    const double eps = std::numeric_limits<double>::epsilon();
    const int max_sweeps = 60;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if (std::abs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;

                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, zeta) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;

                for (std::size_t i = 0; i < n; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = cs * bp - sn * bq;
                    b(i, q) = sn * bp + cs * bq;
                }
                for (std::size_t i = 0; i < m; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = cs * vp - sn * vq;
                    v(i, q) = sn * vp + cs * vq;
                }
            }
        }
        if (!rotated) break;
    }
}

// Replaces zero columns of u with unit vectors orthonormal to the rest so
// the thin factor keeps orthonormal columns even for rank-deficient input.
void complete_orthonormal_columns(Matrix& u, const std::vector<bool>& is_zero) {
    const std::size_t n = u.rows();
    const std::size_t r = u.cols();
    for (std::size_t j = 0; j < r; ++j) {
        if (!is_zero[j]) continue;
        for (std::size_t cand = 0; cand < n; ++cand) {
            std::vector<double> e(n, 0.0);
            e[cand] = 1.0;
            for (std::size_t k = 0; k < r; ++k) {
                if (is_zero[k] && k >= j) continue;  // only project on finished columns
                double proj = 0.0;
                for (std::size_t i = 0; i < n; ++i) proj += e[i] * u(i, k);
                for (std::size_t i = 0; i < n; ++i) e[i] -= proj * u(i, k);
            }
            const double len = norm(e);
            if (len > 0.5) {  // candidate not (nearly) in the span yet
                for (std::size_t i = 0; i < n; ++i) u(i, j) = e[i] / len;
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& a) {
    const std::size_t n = a.rows();
    const std::size_t m = a.cols();

    Matrix b = a;
    Matrix v = Matrix::identity(m);
    jacobi_orthogonalize(b, v);

    std::vector<double> sigma(m);
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += b(i, j) * b(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double sigma_max = sigma.empty() ? 0.0 : sigma[order[0]];
    const double zero_tol = sigma_max * std::numeric_limits<double>::epsilon() * double(std::max(n, m));

    SvdResult out;
    out.u = Matrix(n, m);
    out.v = Matrix(m, m);
    out.sigma.resize(m);
    std::vector<bool> u_zero(m, false);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t src = order[j];
        out.sigma[j] = sigma[src];
        for (std::size_t i = 0; i < m; ++i) out.v(i, j) = v(i, src);
        if (sigma[src] > zero_tol && sigma[src] > 0.0) {
            for (std::size_t i = 0; i < n; ++i) out.u(i, j) = b(i, src) / sigma[src];
        } else {
            out.sigma[j] = sigma[src];  // keep the tiny value, only the u column is arbitrary
            u_zero[j] = true;
        }
    }
    complete_orthonormal_columns(out.u, u_zero);
    return out;
}

}  // namespace

SvdResult svd(const Matrix& a) {
    if (a.empty()) throw InvalidInput("svd: empty matrix");
    if (!all_finite(a.data())) throw InvalidInput("svd: non-finite entries");

    if (a.rows() >= a.cols()) return svd_tall(a);

    // Wide matrix: decompose the transpose and swap the factors.
    SvdResult t = svd_tall(transpose(a));
    return SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

double default_pinv_rel_tol(const Matrix& a) {
    return 1e-10 * double(std::max(a.rows(), a.cols()));
}

Matrix pinv(const Matrix& a, double rel_tol) {
    if (a.empty()) throw InvalidInput("pinv: empty matrix");
    if (rel_tol <= 0.0) throw InvalidInput("pinv: rel_tol must be positive");

    SvdResult d = svd(a);
    const double sigma_max = d.sigma.empty() ? 0.0 : d.sigma.front();
    const double cutoff = rel_tol * sigma_max;

    // v * diag(sigma^+) * u^T; singular values at or below the cutoff are
    // left alone (inverted as zero), which makes pinv(0) == 0.
    const std::size_t r = d.sigma.size();
    Matrix vs(d.v.rows(), r);
    for (std::size_t j = 0; j < r; ++j) {
        const double s = d.sigma[j];
        const double inv = (s > cutoff && s > 0.0) ? 1.0 / s : 0.0;
        for (std::size_t i = 0; i < d.v.rows(); ++i) vs(i, j) = d.v(i, j) * inv;
    }
    return matmul(vs, transpose(d.u));
}

Matrix pinv(const Matrix& a) { return pinv(a, default_pinv_rel_tol(a)); }

}  // namespace cg
