#include <doctest.h>

#include <limits>

#include "cg/errors.hpp"
#include "cg/matrix.hpp"

using namespace cg;

TEST_CASE("matrix construction validates shape and finiteness") {
    Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 6.0);

    CHECK_THROWS_AS(Matrix(2, 2, {1, 2, 3}), InvalidInput);
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidInput);
    CHECK_THROWS_AS(Matrix(1, 1, {std::numeric_limits<double>::infinity()}), InvalidInput);
}

TEST_CASE("matmul small example") {
    Matrix a{{1, 2, 3}, {4, 5, 6}};
    Matrix b{{7, 8}, {9, 10}, {11, 12}};
    Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
    CHECK_THROWS_AS(matmul(a, a), InvalidInput);
}

TEST_CASE("transpose and identity") {
    Matrix a{{1, 2}, {3, 4}, {5, 6}};
    Matrix t = transpose(a);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t(0, 2) == 5.0);
    CHECK(matmul(Matrix::identity(3), a) == a);
}

TEST_CASE("matvec and vecmat agree with matmul") {
    Matrix a{{1, 2}, {3, 4}, {5, 6}};
    std::vector<double> x{2, -1};
    const auto y = matvec(a, x);
    CHECK(y == std::vector<double>{0, 2, 4});

    std::vector<double> z{1, 0, -1};
    const auto w = vecmat(z, a);
    CHECK(w == std::vector<double>{-4, -4});
}

TEST_CASE("norms") {
    Matrix a{{3, 0}, {0, 4}};
    CHECK(frobenius_norm(a) == 5.0);
    std::vector<double> v{3, 4};
    CHECK(norm(v) == 5.0);
    CHECK(norm_squared(v) == 25.0);
    CHECK(dot(v, std::vector<double>{1.0, 2.0}) == 11.0);
}
