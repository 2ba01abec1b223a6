#include "kpp/spectral.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <queue>
#include <string>

namespace kpp {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Parlett-Reinsch balancing with radix 2 (exact in binary arithmetic).
void balance(DenseMatrix& a) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    const std::size_t n = a.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

// Householder similarity reduction to upper Hessenberg form.
void to_hessenberg(DenseMatrix& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    Vector v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
        alpha = std::sqrt(alpha);
        if (alpha == 0.0) continue;
        if (a(k + 1, k) > 0) alpha = -alpha;
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
        v[k + 1] -= alpha;
        double vn = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) vn += v[i] * v[i];
        if (vn == 0.0) continue;
        const double beta = 2.0 / vn;
        // A <- H A
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
            s *= beta;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
        }
        // A <- A H
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
            s *= beta;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
        }
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
// Indices are 1-based inside, mirroring the classical EISPACK formulation.
ComplexVector hessenberg_qr(DenseMatrix h) {
    const int n = static_cast<int>(h.rows());
    auto A = [&h](int i, int j) -> double& { return h(i - 1, j - 1); };
    std::vector<double> wr(n + 1, 0.0), wi(n + 1, 0.0);

    double anorm = 0.0;
    for (int i = 1; i <= n; ++i)
        for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(A(i, j));

    constexpr int kMaxIts = 60;
    std::size_t total_its = 0;
    int nn = n;
    double t = 0.0;
    while (nn >= 1) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 2; --l) {
                double s = std::abs(A(l - 1, l - 1)) + std::abs(A(l, l));
                if (s == 0.0) s = anorm;
                // The normwise test catches clusters of zero eigenvalues, where
                // both diagonal neighbours are themselves roundoff.
                if (std::abs(A(l, l - 1)) <= kEps * s || std::abs(A(l, l - 1)) <= kEps * anorm) {
                    A(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = A(nn, nn);
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
            } else {
                double y = A(nn - 1, nn - 1);
                double w = A(nn, nn - 1) * A(nn - 1, nn);
                if (l == nn - 1) {
                    const double p = 0.5 * (y - x);
                    const double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + std::copysign(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) wr[nn] = x - w / z;
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if (its == kMaxIts)
                        throw ConvergenceError("Hessenberg QR did not converge", total_its);
                    if (its > 0 && its % 10 == 0) {
                        // exceptional shift
                        t += x;
                        for (int i = 1; i <= nn; ++i) A(i, i) -= x;
                        const double s = std::abs(A(nn, nn - 1)) + std::abs(A(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    ++total_its;
                    int m = nn - 2;
                    double p = 0, q = 0, r = 0, z = 0;
                    for (; m >= l; --m) {
                        z = A(m, m);
                        r = x - z;
                        double s = y - z;
                        p = (r * s - w) / A(m + 1, m) + A(m, m + 1);
                        q = A(m + 1, m + 1) - z - r - s;
                        r = A(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(A(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v =
                            std::abs(p) * (std::abs(A(m - 1, m - 1)) + std::abs(z) + std::abs(A(m + 1, m + 1)));
                        if (u <= kEps * v) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        A(i, i - 2) = 0.0;
                        if (i != m + 2) A(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = A(k, k - 1);
                            q = A(k + 1, k - 1);
                            r = 0.0;
                            if (k != nn - 1) r = A(k + 2, k - 1);
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) A(k, k - 1) = -A(k, k - 1);
                        } else {
                            A(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            p = A(k, j) + q * A(k + 1, j);
                            if (k != nn - 1) {
                                p += r * A(k + 2, j);
                                A(k + 2, j) -= p * z;
                            }
                            A(k + 1, j) -= p * y;
                            A(k, j) -= p * x;
                        }
                        const int mmin = nn < k + 3 ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            p = x * A(i, k) + y * A(i, k + 1);
                            if (k != nn - 1) {
                                p += z * A(i, k + 2);
                                A(i, k + 2) -= p * r;
                            }
                            A(i, k + 1) -= p * q;
                            A(i, k) -= p;
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }

    ComplexVector out(n);
    for (int i = 1; i <= n; ++i) out[i - 1] = {wr[i], wi[i]};
    return out;
}

void sort_eigenvalues(ComplexVector& ev) {
    std::sort(ev.begin(), ev.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}

ComplexVector inverse_iteration(const DenseMatrix& a, Complex lambda, double scale) {
    const std::size_t n = a.rows();
    ComplexMatrix b = to_complex(a);
    // Nudge the shift off the exact eigenvalue so the factorization exists.
    const Complex shift = lambda + Complex(1e-10 * scale, 1e-11 * scale);
    for (std::size_t i = 0; i < n; ++i) b(i, i) -= shift;
    auto lu = LuFactor<Complex>::factor(b, 0.0);
    if (!lu) {
        for (std::size_t i = 0; i < n; ++i) b(i, i) -= Complex(1e-8 * scale, 0.0);
        lu = LuFactor<Complex>::factor(b, 0.0);
        if (!lu) throw ConvergenceError("inverse iteration: singular shifted matrix", 0);
    }
    ComplexVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = Complex(1.0 + 0.1 * static_cast<double>(i % 7), 0.05 * static_cast<double>(i % 3));
    for (int it = 0; it < 3; ++it) {
        lu->solve_in_place(v);
        double nv = 0.0;
        for (const auto& x : v) nv += std::norm(x);
        nv = std::sqrt(nv);
        for (auto& x : v) x /= nv;
    }
    // Fix the phase so that the largest entry is real and positive.
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
    const Complex phase = std::abs(v[imax]) > 0 ? std::conj(v[imax]) / std::abs(v[imax]) : Complex(1.0);
    for (auto& x : v) x *= phase;
    return v;
}

}  // namespace

double ComplexSpectrum::max_real() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues) m = std::max(m, l.real());
    return m;
}

double ComplexSpectrum::min_real() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues) m = std::min(m, l.real());
    return m;
}

ComplexSpectrum spectrum(const DenseMatrix& a, bool want_vectors, double residual_tol) {
    if (!a.square() || a.rows() == 0) throw MalformedInput("spectrum: matrix must be square and non-empty");
    if (!all_finite(a)) throw MalformedInput("spectrum: non-finite entry");

    DenseMatrix h = a;
    balance(h);
    to_hessenberg(h);
    ComplexSpectrum out;
    out.eigenvalues = hessenberg_qr(std::move(h));
    sort_eigenvalues(out.eigenvalues);

    if (want_vectors) {
        const std::size_t n = a.rows();
        const double anorm = frobenius_norm(a);
        const double scale = std::max(anorm, 1.0);
        const ComplexMatrix ac = to_complex(a);
        ComplexMatrix vecs(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            const Complex lambda = out.eigenvalues[k];
            const ComplexVector v = inverse_iteration(a, lambda, scale);
            const ComplexVector av = ac * v;
            double res = 0.0;
            for (std::size_t i = 0; i < n; ++i) res += std::norm(av[i] - lambda * v[i]);
            res = std::sqrt(res);
            if (res > residual_tol * scale)
                throw ConvergenceError("eigenvector residual check failed for eigenvalue " + std::to_string(k), 3);
            for (std::size_t i = 0; i < n; ++i) vecs(i, k) = v[i];
        }
        out.eigenvectors = std::move(vecs);
        out.eigvecs_available = true;
    }
    return out;
}

double multiset_distance(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    std::vector<bool> used(b.size(), false);
    double worst = 0.0;
    for (const Complex& x : a) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (used[j]) continue;
            const double d = std::abs(x - b[j]);
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        used[arg] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

PerronPair perron_eigenpair(const DenseMatrix& a, double tol, std::size_t max_iter) {
    if (!a.square() || a.rows() == 0) throw MalformedInput("perron_eigenpair: matrix must be square");
    if (!all_finite(a)) throw MalformedInput("perron_eigenpair: non-finite entry");
    if (check_essentially_nonnegative(a, 0.0).verdict != Verdict::holds)
        throw PreconditionError("perron_eigenpair: matrix is not essentially nonnegative");
    if (!is_irreducible(a)) throw PreconditionError("perron_eigenpair: matrix is reducible");

    const std::size_t n = a.rows();
    double shift = 0.0;
    for (std::size_t i = 0; i < n; ++i) shift = std::max(shift, std::abs(a(i, i)));
    shift += 1.0;
    DenseMatrix b = a;
    for (std::size_t i = 0; i < n; ++i) b(i, i) += shift;

    const double scale = std::max(1.0, inf_norm(a));
    const double nd = static_cast<double>(n);
    Vector v = ones(n);
    PerronPair out;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        Vector w = b * v;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = w[i] / v[i];
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        const double s = norm1(w);
        for (auto& x : w) x *= nd / s;
        v = std::move(w);
        if (hi - lo <= tol * scale) {
            out.iterations = it;
            out.value = 0.5 * (lo + hi) - shift;
            break;
        }
        if (it == max_iter) throw ConvergenceError("Perron power iteration did not converge", it);
    }
    const Vector av = a * v;
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(av[i] - out.value * v[i]));
    out.residual = res;
    out.vector = std::move(v);
    return out;
}

DenseMatrix make_circulant(std::span<const double> phi) {
    const std::size_t n = phi.size();
    if (n == 0) throw MalformedInput("make_circulant: empty phi");
    if (!all_finite(phi)) throw MalformedInput("make_circulant: non-finite phi");
    for (double p : phi)
        if (!(p > 0.0)) throw PreconditionError("make_circulant: phi must be positive");
    DenseMatrix c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c(i, j) = phi[(i + 2 * n - j - 1) % n];
    return c;
}

ComplexMatrix dft_matrix(std::size_t n) {
    if (n == 0) throw MalformedInput("dft_matrix: n must be positive");
    ComplexMatrix u(n, n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            // reduce jk mod n before scaling to keep the angle small
            const double angle =
                -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
            u(j, k) = norm * Complex(std::cos(angle), std::sin(angle));
        }
    return u;
}

ComplexSpectrum circulant_spectrum_via_dft(std::span<const double> phi) {
    const std::size_t n = phi.size();
    if (n == 0) throw MalformedInput("circulant_spectrum_via_dft: empty phi");
    for (double p : phi)
        if (!(p > 0.0)) throw PreconditionError("circulant_spectrum_via_dft: phi must be positive");
    ComplexVector rotated(n);
    rotated[0] = phi[n - 1];
    for (std::size_t j = 1; j < n; ++j) rotated[j] = phi[j - 1];
    ComplexSpectrum out;
    out.eigenvalues = dft_matrix(n) * rotated;
    const double root_n = std::sqrt(static_cast<double>(n));
    for (auto& l : out.eigenvalues) l *= root_n;
    sort_eigenvalues(out.eigenvalues);
    return out;
}

std::string_view to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "neumann"; }

Boundary parse_boundary(std::string_view s) {
    if (s == "periodic") return Boundary::periodic;
    if (s == "neumann") return Boundary::neumann;
    throw MalformedInput("unknown boundary '" + std::string(s) + "'");
}

DenseMatrix make_discrete_laplacian(std::span<const double> sigmas, Boundary boundary) {
    const std::size_t n = sigmas.size();
    if (n < 2) throw MalformedInput("make_discrete_laplacian: need N >= 2");
    for (double s : sigmas)
        if (!std::isfinite(s) || !(s > 0.0)) throw MalformedInput("make_discrete_laplacian: sigmas must be positive");
    DenseMatrix m(n, n);
    // Row k of the gradient couples nodes k-1 and k (row 0 couples N-1 and 0).
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0 && boundary == Boundary::neumann) continue;
        const std::size_t a = k == 0 ? n - 1 : k - 1;
        const std::size_t b = k;
        m(a, b) += sigmas[k];
        m(b, a) += sigmas[k];
    }
    zero_row_sums(m);
    return m;
}

SystemSpec::SystemSpec(Vector d, DenseMatrix m, DenseMatrix c)
    : d_(std::move(d)), m_(std::move(m)), c_(std::move(c)) {
    const std::size_t n = d_.size();
    if (n == 0) throw MalformedInput("SystemSpec: empty system");
    if (m_.rows() != n || m_.cols() != n || c_.rows() != n || c_.cols() != n)
        throw MalformedInput("SystemSpec: dimension mismatch between D, M and C");
    if (!all_finite(d_) || !all_finite(m_) || !all_finite(c_))
        throw MalformedInput("SystemSpec: non-finite entry");
    for (double x : d_)
        if (!(x > 0.0)) throw MalformedInput("SystemSpec: diffusion rates must be positive");
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::holds_within_tolerance: return "holds_within_tolerance";
        case Verdict::fails: return "fails";
    }
    return "fails";
}

namespace {

Check mismatch_check(double mismatch, double threshold) {
    if (mismatch == 0.0) return {Verdict::holds, mismatch};
    if (mismatch <= threshold) return {Verdict::holds_within_tolerance, mismatch};
    return {Verdict::fails, mismatch};
}

void require_square_finite(const DenseMatrix& a) {
    if (!a.square() || a.rows() == 0) throw MalformedInput("matrix must be square and non-empty");
    if (!all_finite(a)) throw MalformedInput("non-finite matrix entry");
}

// Nodes reachable from node 0 along edges i -> j with a_ij > 0 (or a_ji when
// `reverse`).
std::vector<bool> reachable(const DenseMatrix& a, bool reverse) {
    const std::size_t n = a.rows();
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> q;
    seen[0] = true;
    q.push(0);
    while (!q.empty()) {
        const std::size_t i = q.front();
        q.pop();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || seen[j]) continue;
            const double w = reverse ? a(j, i) : a(i, j);
            if (w > 0.0) {
                seen[j] = true;
                q.push(j);
            }
        }
    }
    return seen;
}

}  // namespace

Check check_essentially_nonnegative(const DenseMatrix& a, double tol) {
    require_square_finite(a);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) worst = std::max(worst, -a(i, j));
    return mismatch_check(worst, tol * frobenius_norm(a));
}

bool is_irreducible(const DenseMatrix& a) { return check_irreducible(a).verdict == Verdict::holds; }

Check check_irreducible(const DenseMatrix& a) {
    require_square_finite(a);
    const auto fwd = reachable(a, false);
    const auto bwd = reachable(a, true);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        if (!(fwd[i] && bwd[i])) ++outside;
    return {outside == 0 ? Verdict::holds : Verdict::fails, static_cast<double>(outside)};
}

Check check_line_sum_symmetric(const DenseMatrix& a, double tol) {
    require_square_finite(a);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) worst = std::max(worst, std::abs(row_sum(a, i) - col_sum(a, i)));
    return mismatch_check(worst, tol * frobenius_norm(a));
}

Check check_zero_row_sums(const DenseMatrix& a, double tol) {
    require_square_finite(a);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) worst = std::max(worst, std::abs(row_sum(a, i)));
    return mismatch_check(worst, tol * std::max(1.0, frobenius_norm(a)));
}

Check check_positive(const DenseMatrix& a) {
    require_square_finite(a);
    double lo = std::numeric_limits<double>::infinity();
    for (double x : a.data()) lo = std::min(lo, x);
    return {lo > 0.0 ? Verdict::holds : Verdict::fails, lo};
}

Check check_normal(const DenseMatrix& a, double tol) {
    require_square_finite(a);
    const DenseMatrix at = a.transpose();
    const double fro = frobenius_norm(a);
    if (fro == 0.0) return {Verdict::holds, 0.0};
    const double rel = frobenius_norm(a * at - at * a) / (fro * fro);
    return mismatch_check(rel, tol);
}

Check check_unit_row_sums(const DenseMatrix& a, double tol) {
    require_square_finite(a);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) worst = std::max(worst, std::abs(row_sum(a, i) - 1.0));
    return mismatch_check(worst, tol * std::max(1.0, frobenius_norm(a)));
}

Check check_right_half_plane(const DenseMatrix& a, double tol) {
    require_square_finite(a);
    const double lo = spectrum(a).min_real();
    const double fro = frobenius_norm(a);
    // Eigenvalues that are zero in exact arithmetic come back as O(n eps ||A||).
    const double roundoff = 16.0 * static_cast<double>(a.rows()) * kEps * fro;
    if (lo >= -roundoff) return {Verdict::holds, lo};
    if (lo >= -tol * fro) return {Verdict::holds_within_tolerance, lo};
    return {Verdict::fails, lo};
}

bool AssumptionReport::a1() const {
    return a1_essentially_nonnegative.ok() && a1_irreducible.ok() && a1_line_sum_symmetric.ok() &&
           a1_pf_eigenpair.ok();
}

bool AssumptionReport::a2() const { return a2_positive.ok() && a2_normal.ok() && a2_pf_one.ok(); }

bool AssumptionReport::a3() const { return a3_right_half_plane.ok(); }

bool AssumptionReport::all_exact() const {
    for (const Check* c : {&a1_essentially_nonnegative, &a1_irreducible, &a1_line_sum_symmetric, &a1_pf_eigenpair,
                           &a2_positive, &a2_normal, &a2_pf_one, &a3_right_half_plane})
        if (c->verdict != Verdict::holds) return false;
    return true;
}

AssumptionReport check_assumptions(const SystemSpec& spec, double tol) {
    const auto& m = spec.M();
    const auto& c = spec.C();
    AssumptionReport r;
    r.a1_essentially_nonnegative = check_essentially_nonnegative(m, tol);
    r.a1_irreducible = check_irreducible(m);
    r.a1_line_sum_symmetric = check_line_sum_symmetric(m, tol);
    r.a1_pf_eigenpair = check_zero_row_sums(m, tol);
    r.a2_positive = check_positive(c);
    r.a2_normal = check_normal(c, tol);
    r.a2_pf_one = check_unit_row_sums(c, tol);
    r.a3_right_half_plane = check_right_half_plane(c, tol);
    return r;
}

}  // namespace kpp
