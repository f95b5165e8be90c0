// Thin singular value decomposition and the Moore-Penrose pseudo-inverse.
#pragma once

#include <vector>

#include "cg/matrix.hpp"

namespace cg {

// Thin SVD a = u * diag(sigma) * v^T with r = min(rows, cols) factors.
// u is rows x r, v is cols x r, both with orthonormal columns; sigma is
// sorted descending and nonnegative.
struct SvdResult {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;
};

SvdResult svd(const Matrix& a);

// Default relative cutoff for numerical rank: singular values at or below
// rel_tol * sigma_max are treated as zero. The default scales with the
// matrix size to absorb accumulated rounding.
double default_pinv_rel_tol(const Matrix& a);

// Moore-Penrose pseudo-inverse v * diag(sigma^+) * u^T, shape cols x rows.
// An all-zero input yields the all-zero matrix of transposed shape.
Matrix pinv(const Matrix& a, double rel_tol);
Matrix pinv(const Matrix& a);

}  // namespace cg
