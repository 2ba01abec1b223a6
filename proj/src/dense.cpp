#include "kpp/dense.hpp"

#include <algorithm>
#include <numeric>

namespace kpp {

Vector operator*(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw MalformedInput("matrix-vector dimension mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

ComplexVector operator*(const ComplexMatrix& a, std::span<const Complex> x) {
    if (a.cols() != x.size()) throw MalformedInput("matrix-vector dimension mismatch");
    ComplexVector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        Complex s{};
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

ComplexMatrix to_complex(const DenseMatrix& a) {
    ComplexMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
    return c;
}

ComplexMatrix adjoint(const ComplexMatrix& a) {
    ComplexMatrix h(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) h(j, i) = std::conj(a(i, j));
    return h;
}

double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

double frobenius_norm(const ComplexMatrix& a) {
    double s = 0.0;
    for (const Complex& x : a.data()) s += std::norm(x);
    return std::sqrt(s);
}

double inf_norm(const DenseMatrix& a) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double x : a.row(i)) s += std::abs(x);
        best = std::max(best, s);
    }
    return best;
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

bool all_finite(const DenseMatrix& a) { return all_finite(a.data()); }

bool all_finite(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

double norm1(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
}

Vector ones(std::size_t n) { return Vector(n, 1.0); }

double row_sum(const DenseMatrix& a, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j)
        if (j != i) s += a(i, j);
    return s + a(i, i);
}

double col_sum(const DenseMatrix& a, std::size_t j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        if (i != j) s += a(i, j);
    return s + a(j, j);
}

void zero_row_sums(DenseMatrix& a) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (j != i) s += a(i, j);
        a(i, i) = -s;
    }
}

template <typename T>
std::optional<LuFactor<T>> LuFactor<T>::factor(Matrix<T> a, double rel_pivot_tol) {
    if (!a.square()) throw MalformedInput("LU of non-square matrix");
    const std::size_t n = a.rows();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    double scale = 0.0;
    for (const T& x : a.data()) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return std::nullopt;
    const double floor = rel_pivot_tol * scale;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                p = i;
            }
        }
        if (!(best > floor)) return std::nullopt;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
            std::swap(perm[k], perm[p]);
        }
        const T pivot = a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const T l = a(i, k) / pivot;
            a(i, k) = l;
            if (l == T{}) continue;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= l * a(k, j);
        }
    }
    return LuFactor(std::move(a), std::move(perm));
}

template <typename T>
void LuFactor<T>::solve_in_place(std::span<T> b) const {
    const std::size_t n = lu_.rows();
    std::vector<T> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
        T s = y[i];
        for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * y[j];
        y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        T s = y[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * y[j];
        y[i] = s / lu_(i, i);
    }
    std::copy(y.begin(), y.end(), b.begin());
}

template <typename T>
std::vector<T> LuFactor<T>::solve(std::span<const T> b) const {
    std::vector<T> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
}

template <typename T>
Matrix<T> LuFactor<T>::solve(const Matrix<T>& b) const {
    Matrix<T> x(b.rows(), b.cols());
    std::vector<T> col(b.rows());
    for (std::size_t j = 0; j < b.cols(); ++j) {
        for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
        solve_in_place(col);
        for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = col[i];
    }
    return x;
}

template <typename T>
Matrix<T> LuFactor<T>::inverse() const {
    return solve(Matrix<T>::identity(lu_.rows()));
}

template class LuFactor<double>;
template class LuFactor<Complex>;

}  // namespace kpp
