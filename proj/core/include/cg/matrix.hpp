// Dense row-major matrix of doubles plus the small vector helpers the rest
// of the library is built on.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cg {

class Matrix {
public:
    Matrix() = default;

    // Zero-filled r x c matrix.
    Matrix(std::size_t rows, std::size_t cols);

    // Takes ownership of row-major data; throws InvalidInput if the length
    // does not match or any entry is non-finite.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    // Literal construction: Matrix{{1, 2}, {3, 4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    static Matrix identity(std::size_t n);
    static Matrix from_column(std::span<const double> v);
    static Matrix from_row(std::span<const double> v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::vector<double> col(std::size_t j) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// a (r x c) * x (c) -> r
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
// x (r) * a (r x c) -> c; the reverse-sweep primitive.
std::vector<double> vecmat(std::span<const double> x, const Matrix& a);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm_squared(std::span<const double> v);
double norm(std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace cg
