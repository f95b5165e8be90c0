// Test-only oracles, independent of the library code paths they check.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "cg/matrix.hpp"
#include "cg/network.hpp"

namespace cg_test {

inline cg::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    cg::Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

// Rank-deficient matrix built as an outer product of random factors.
inline cg::Matrix random_low_rank(std::size_t rows, std::size_t cols, std::size_t rank,
                                  std::mt19937_64& rng) {
    return cg::matmul(random_matrix(rows, rank, rng), random_matrix(rank, cols, rng));
}

// Plain Gaussian elimination with partial pivoting; solves a x = b.
inline std::vector<double> solve_linear(cg::Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a(r, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j) a(r, j) -= factor * a(col, j);
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t j = r + 1; j < n; ++j) acc -= a(r, j) * x[j];
        x[r] = acc / a(r, r);
    }
    return x;
}

// Central finite differences of the network outputs w.r.t. the input,
// matching the (dim x k) Jacobian convention. Step 1e-4 * (1 + |x_i|).
inline cg::Matrix finite_difference_jacobian(const cg::Network& net,
                                             const std::vector<double>& x) {
    const std::size_t d = x.size();
    const std::size_t k = net.output_dim();
    cg::Matrix jac(d, k);
    for (std::size_t i = 0; i < d; ++i) {
        const double h = 1e-4 * (1.0 + std::abs(x[i]));
        std::vector<double> lo = x, hi = x;
        lo[i] -= h;
        hi[i] += h;
        const auto out_lo = cg::forward(net, lo).back();
        const auto out_hi = cg::forward(net, hi).back();
        for (std::size_t j = 0; j < k; ++j) jac(i, j) = (out_hi[j] - out_lo[j]) / (2.0 * h);
    }
    return jac;
}

// True when every relu input stays clear of its kink, so central finite
// differences are valid in the step neighborhood.
inline bool away_from_relu_kinks(const cg::Network& net, const std::vector<double>& x,
                                 double margin = 5e-3) {
    const auto acts = cg::forward(net, x);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const cg::Layer& layer = net.layers()[l];
        if (!layer.is_linear() && layer.activation() == cg::Activation::Relu)
            for (double v : acts[l])
                if (std::abs(v) < margin) return false;
    }
    return true;
}

// Max relative error between two matrices, with an absolute floor so that
// near-zero entries compare absolutely.
inline double max_relative_error(const cg::Matrix& a, const cg::Matrix& b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), floor});
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / denom);
    }
    return worst;
}

}  // namespace cg_test
