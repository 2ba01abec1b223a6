#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "kpp/errors.hpp"

namespace kpp {

using Vector = std::vector<double>;
using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Row-major dense matrix. Square in almost every use here, but the shape is
/// kept general so that block solvers and the DFT can share it.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    explicit Matrix(std::size_t n) : Matrix(n, n) {}

    /// Builds from nested rows; all rows must have equal length.
    Matrix(std::initializer_list<std::initializer_list<T>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw MalformedInput("ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = T(d[i]);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_; }
    bool square() const noexcept { return rows_ == cols_; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const T> data() const noexcept { return data_; }
    std::span<T> data() noexcept { return data_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Matrix& operator*=(T s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, T s) { return a *= s; }
    friend Matrix operator*(T s, Matrix a) { return a *= s; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const T aik = a(i, k);
                if (aik == T{}) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using DenseMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

Vector operator*(const DenseMatrix& a, std::span<const double> x);
ComplexVector operator*(const ComplexMatrix& a, std::span<const Complex> x);

ComplexMatrix to_complex(const DenseMatrix& a);
/// Conjugate transpose.
ComplexMatrix adjoint(const ComplexMatrix& a);

double frobenius_norm(const DenseMatrix& a);
double frobenius_norm(const ComplexMatrix& a);
double inf_norm(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);
bool all_finite(const DenseMatrix& a);
bool all_finite(std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);
double norm1(std::span<const double> x);
Vector ones(std::size_t n);

/// Row sum with off-diagonal entries accumulated in index order and the
/// diagonal added last. Constructions that set the diagonal to minus the
/// off-diagonal sum therefore have row sums that are exactly zero.
double row_sum(const DenseMatrix& a, std::size_t i);
/// Column counterpart of row_sum, same accumulation order.
double col_sum(const DenseMatrix& a, std::size_t j);

/// Sets every diagonal entry to minus the (index-ordered) off-diagonal row sum.
void zero_row_sums(DenseMatrix& a);

/// LU factorization with partial pivoting. Construct through `factor`.
template <typename T>
class LuFactor {
public:
    /// Returns nullopt when a pivot falls below `rel_pivot_tol * max|a_ij|`.
    static std::optional<LuFactor> factor(Matrix<T> a, double rel_pivot_tol = 1e-14);

    std::vector<T> solve(std::span<const T> b) const;
    void solve_in_place(std::span<T> b) const;
    Matrix<T> solve(const Matrix<T>& b) const;
    Matrix<T> inverse() const;
    std::size_t size() const noexcept { return lu_.rows(); }

private:
    LuFactor(Matrix<T> lu, std::vector<std::size_t> perm) : lu_(std::move(lu)), perm_(std::move(perm)) {}

    Matrix<T> lu_;
    std::vector<std::size_t> perm_;
};

extern template class LuFactor<double>;
extern template class LuFactor<Complex>;

}  // namespace kpp
