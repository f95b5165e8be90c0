#include <doctest.h>

#include <limits>
#include <random>

#include "cg/errors.hpp"
#include "cg/svd.hpp"
#include "helpers.hpp"

using namespace cg;
using cg_test::random_low_rank;
using cg_test::random_matrix;
using cg_test::solve_linear;

namespace {

Matrix reconstruct(const SvdResult& d) {
    Matrix us = d.u;
    for (std::size_t j = 0; j < d.sigma.size(); ++j)
        for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= d.sigma[j];
    return matmul(us, transpose(d.v));
}

}  // namespace

TEST_CASE("svd of identity") {
    const SvdResult d = svd(Matrix::identity(2));
    CHECK(d.sigma[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.sigma[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(max_abs_diff(reconstruct(d), Matrix::identity(2)) < 1e-12);
}

TEST_CASE("svd of diagonal matrix sorts singular values descending") {
    const SvdResult d = svd(Matrix{{3, 0}, {0, 2}});
    CHECK(d.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(d.sigma[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("svd reconstruction of a random 5x3 matrix") {
    std::mt19937_64 rng(11);
    const Matrix a = random_matrix(5, 3, rng);
    const SvdResult d = svd(a);
    CHECK(frobenius_norm(sub(reconstruct(d), a)) / frobenius_norm(a) < 1e-9);
    for (std::size_t j = 1; j < d.sigma.size(); ++j) CHECK(d.sigma[j - 1] >= d.sigma[j]);
    CHECK(d.sigma.back() >= 0.0);
}

TEST_CASE("svd factors have orthonormal columns, wide and tall") {
    std::mt19937_64 rng(12);
    for (auto [r, c] : {std::pair<std::size_t, std::size_t>{6, 4}, {4, 6}, {5, 5}}) {
        const Matrix a = random_matrix(r, c, rng);
        const SvdResult d = svd(a);
        CHECK(max_abs_diff(matmul(transpose(d.u), d.u), Matrix::identity(d.sigma.size())) < 1e-10);
        CHECK(max_abs_diff(matmul(transpose(d.v), d.v), Matrix::identity(d.sigma.size())) < 1e-10);
        CHECK(frobenius_norm(sub(reconstruct(d), a)) / frobenius_norm(a) < 1e-9);
    }
}

TEST_CASE("svd rejects bad input") {
    CHECK_THROWS_AS(svd(Matrix()), InvalidInput);
    Matrix bad(1, 2, {1.0, 2.0});
    bad.data()[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd(bad), InvalidInput);
}

TEST_CASE("pinv identity and fixed fixtures") {
    CHECK(max_abs_diff(pinv(Matrix::identity(3)), Matrix::identity(3)) < 1e-12);

    // Column vector rule v^T / ||v||^2.
    const Matrix p = pinv(Matrix{{100}, {0}});
    CHECK(p.rows() == 1);
    CHECK(p.cols() == 2);
    CHECK(p(0, 0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(p(0, 1) == doctest::Approx(0.0).epsilon(1e-12));

    // Inverse behind y = -9 c0 + 10 c1.
    const Matrix q = pinv(Matrix{{1, 1}, {0, 0.1}});
    CHECK(max_abs_diff(q, Matrix{{1, -10}, {0, 10}}) < 1e-9);
}

TEST_CASE("pinv of the zero matrix is the zero matrix of transposed shape") {
    const Matrix z = pinv(Matrix(2, 3));
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 2);
    CHECK(frobenius_norm(z) == 0.0);
}

TEST_CASE("pinv rejects nonpositive tolerance") {
    CHECK_THROWS_AS(pinv(Matrix::identity(2), 0.0), InvalidInput);
    CHECK_THROWS_AS(pinv(Matrix::identity(2), -1.0), InvalidInput);
}

TEST_CASE("Moore-Penrose identities over random matrices") {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t r = dim(rng), c = dim(rng);
        Matrix a;
        if (trial % 3 == 2 && std::min(r, c) > 1) {
            const std::size_t rank = 1 + (trial % std::min(r, c));
            a = random_low_rank(r, c, rank, rng);
        } else {
            a = random_matrix(r, c, rng);
        }
        const Matrix ap = pinv(a);
        CHECK(frobenius_norm(sub(matmul(matmul(a, ap), a), a)) < 1e-8);
        CHECK(frobenius_norm(sub(matmul(matmul(ap, a), ap), ap)) < 1e-8);
        const Matrix aap = matmul(a, ap);
        const Matrix apa = matmul(ap, a);
        CHECK(max_abs_diff(aap, transpose(aap)) < 1e-8);
        CHECK(max_abs_diff(apa, transpose(apa)) < 1e-8);
    }
}

TEST_CASE("pinv is a left inverse on full column rank matrices") {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t c = 1 + std::size_t(trial % 4);
        const std::size_t r = c + 1 + std::size_t(trial % 3);
        const Matrix a = random_matrix(r, c, rng);  // random tall: full rank a.s.
        CHECK(max_abs_diff(matmul(pinv(a), a), Matrix::identity(c)) < 1e-8);
    }
}

TEST_CASE("pinv of a column vector is exactly v^T over its squared norm") {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 1 + std::size_t(trial % 6);
        const Matrix v = random_matrix(d, 1, rng, 3.0);
        const Matrix p = pinv(v);
        const double n2 = norm_squared(v.data());
        for (std::size_t i = 0; i < d; ++i)
            CHECK(p(0, i) == doctest::Approx(v(i, 0) / n2).epsilon(1e-12));
    }
}

TEST_CASE("pinv matches a direct solve on invertible square matrices") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + std::size_t(trial % 4);
        Matrix a = random_matrix(n, n, rng);
        for (std::size_t i = 0; i < n; ++i) a(i, i) += 2.0;  // keep well away from singular
        const Matrix ap = pinv(a);
        // Column j of a^{-1} solves a x = e_j.
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> e(n, 0.0);
            e[j] = 1.0;
            const auto x = solve_linear(a, e);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(std::abs(ap(i, j) - x[i]) < 1e-8);
        }
    }
}
