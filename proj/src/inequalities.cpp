#include "kpp/inequalities.hpp"

#include <algorithm>
#include <limits>

#include "kpp/format.hpp"

namespace kpp {

namespace {

void require_positive(std::span<const double> u, const char* what) {
    for (double x : u)
        if (!std::isfinite(x) || !(x > 0.0)) throw PreconditionError(std::string(what) + ": vector must be positive");
}

double eaves_lhs(const DenseMatrix& a, std::span<const double> u) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) row += a(i, j) * u[j];
        s += row / u[i];
    }
    return s;
}

double total(const DenseMatrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    return s;
}

double relative_spread(std::span<const double> u) {
    double mean = 0.0;
    for (double x : u) mean += x;
    mean /= static_cast<double>(u.size());
    double worst = 0.0;
    for (double x : u) worst = std::max(worst, std::abs(x / mean - 1.0));
    return worst;
}

}  // namespace

std::map<std::string, std::string> InequalityCertificate::record() const {
    std::map<std::string, std::string> r;
    r["lhs"] = fmt(lhs);
    r["rhs"] = fmt(rhs);
    r["margin"] = fmt(margin);
    r["satisfied"] = satisfied ? "1" : "0";
    r["equality"] = equality_case_detected ? "1" : "0";
    for (std::size_t i = 0; i < witness.size(); ++i) r["witness_" + std::to_string(i + 1)] = fmt(witness[i]);
    return r;
}

InequalityCertificate eaves_gap(const DenseMatrix& a, std::span<const double> u, double equality_tol, double tol) {
    if (!a.square() || a.rows() != u.size()) throw MalformedInput("eaves_gap: dimension mismatch");
    if (!all_finite(a)) throw MalformedInput("eaves_gap: non-finite entry");
    for (double x : a.data())
        if (x < 0.0) throw PreconditionError("eaves_gap: matrix must be nonnegative");
    require_positive(u, "eaves_gap");

    InequalityCertificate c;
    c.lhs = eaves_lhs(a, u);
    c.rhs = total(a);
    c.margin = c.lhs - c.rhs;
    const double scale = std::max(1.0, c.rhs);
    c.satisfied = c.margin >= -tol * scale;
    c.equality_case_detected = std::abs(c.margin) <= equality_tol * scale;
    if (c.equality_case_detected && is_irreducible(a))
        c.equality_case_detected = relative_spread(u) <= equality_tol;
    c.witness.assign(u.begin(), u.end());
    return c;
}

double mutation_pairing(const DenseMatrix& m, std::span<const double> u) {
    if (!m.square() || m.rows() != u.size()) throw MalformedInput("mutation_pairing: dimension mismatch");
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.rows(); ++i) lo = std::min(lo, m(i, i));
    DenseMatrix a = m;
    for (std::size_t i = 0; i < m.rows(); ++i) a(i, i) -= lo;
    return eaves_gap(a, u).margin;
}

InequalityCertificate competition_pairing(const DenseMatrix& c, std::span<const double> q, double tol,
                                          double a2_tol) {
    if (!c.square() || c.rows() != q.size()) throw MalformedInput("competition_pairing: dimension mismatch");
    if (!all_finite(q)) throw MalformedInput("competition_pairing: non-finite vector");
    if (!check_positive(c).ok() || !check_normal(c, a2_tol).ok() || !check_unit_row_sums(c, a2_tol).ok())
        throw PreconditionError("competition_pairing: C does not satisfy A2");

    const double min_re = spectrum(c).min_real();
    const double qq = dot(q, q);
    InequalityCertificate cert;
    cert.lhs = dot(q, c * q);
    cert.rhs = min_re * qq;
    cert.margin = cert.lhs - cert.rhs;
    cert.satisfied = cert.margin >= -tol * std::max(qq, 1.0);
    if (min_re >= 0.0) cert.satisfied = cert.satisfied && cert.lhs >= -tol * std::max(qq, 1.0);
    cert.equality_case_detected = std::abs(cert.margin) <= tol * std::max(qq, 1.0);
    cert.witness.assign(q.begin(), q.end());
    return cert;
}

PairingSplit lyapunov_pairing_split(const SystemSpec& spec, std::span<const double> u) {
    if (u.size() != spec.n()) throw MalformedInput("lyapunov_pairing_split: dimension mismatch");
    require_positive(u, "lyapunov_pairing_split");
    const Vector mu = spec.M() * u;
    Vector shifted(u.begin(), u.end());
    for (auto& x : shifted) x -= 1.0;
    const Vector cs = spec.C() * shifted;
    PairingSplit out;
    for (std::size_t i = 0; i < u.size(); ++i) {
        out.mutation_side -= mu[i] / u[i];
        out.competition_side += shifted[i] * cs[i];
    }
    return out;
}

double parabolic_lyapunov(const DenseMatrix& values, double dx) {
    if (values.cols() < 2) throw MalformedInput("parabolic_lyapunov: need at least two grid points");
    double total_v = 0.0;
    for (std::size_t i = 0; i < values.rows(); ++i) {
        const auto row = values.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double u = row[j];
            if (!(u > 0.0)) throw PreconditionError("parabolic_lyapunov: field must be positive");
            const double w = (j == 0 || j + 1 == row.size()) ? 0.5 : 1.0;
            s += w * (u - std::log(u));
        }
        total_v += s * dx;
    }
    return total_v;
}

namespace {

// Eaves margin as a function of x = log u, with gradient.
double log_margin(const DenseMatrix& a, const Vector& x, Vector& grad) {
    const std::size_t n = a.rows();
    std::fill(grad.begin(), grad.end(), 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || a(i, j) == 0.0) continue;
            const double t = a(i, j) * std::exp(x[j] - x[i]);
            s += t;
            grad[j] += t;
            grad[i] -= t;
        }
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) off += a(i, j);
    return s - off;
}

Vector descend(const DenseMatrix& a, Vector x) {
    const std::size_t n = x.size();
    Vector g(n), xt(n), gt(n);
    double f = log_margin(a, x, g);
    double step = 1.0;
    for (int it = 0; it < 500; ++it) {
        const double gn = norm2(g);
        if (gn < 1e-12) break;
        bool moved = false;
        for (int half = 0; half < 60; ++half) {
            for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] - step * g[i];
            // project onto sum(x) = 0
            double mean = 0.0;
            for (double v : xt) mean += v;
            mean /= static_cast<double>(n);
            for (auto& v : xt) v -= mean;
            const double ft = log_margin(a, xt, gt);
            if (ft < f - 1e-4 * step * gn * gn) {
                x = xt;
                g = gt;
                f = ft;
                step *= 2.0;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return x;
}

}  // namespace

InequalityCertificate find_eaves_witness(const DenseMatrix& a, Rng& rng, int restarts) {
    const std::size_t n = a.rows();
    std::normal_distribution<double> g(0.0, 1.0);
    InequalityCertificate best;
    best.margin = std::numeric_limits<double>::infinity();
    for (int r = 0; r <= restarts; ++r) {
        Vector x(n, 0.0);
        if (r > 0)
            for (auto& v : x) v = g(rng);
        x = descend(a, std::move(x));
        Vector u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = std::exp(x[i]);
        auto cert = eaves_gap(a, u);
        if (cert.margin < best.margin) best = std::move(cert);
    }
    return best;
}

InequalityCertificate find_competition_witness(const DenseMatrix& c) {
    const auto sp = spectrum(c, true);
    std::size_t k = 0;
    for (std::size_t i = 1; i < sp.size(); ++i)
        if (sp.eigenvalues[i].real() < sp.eigenvalues[k].real()) k = i;
    const std::size_t n = c.rows();
    Vector re(n), im(n);
    for (std::size_t i = 0; i < n; ++i) {
        re[i] = (*sp.eigenvectors)(i, k).real();
        im[i] = (*sp.eigenvectors)(i, k).imag();
    }
    const double min_re = sp.eigenvalues[k].real();
    auto make = [&](const Vector& q) {
        InequalityCertificate cert;
        const double qq = dot(q, q);
        cert.lhs = dot(q, c * q);
        cert.rhs = min_re * qq;
        cert.margin = cert.lhs - cert.rhs;
        cert.satisfied = cert.lhs >= -1e-10 * std::max(qq, 1.0);
        cert.witness = q;
        return cert;
    };
    auto a = make(re);
    if (norm2(im) > 1e-8) {
        auto b = make(im);
        if (b.lhs / dot(im, im) < a.lhs / std::max(dot(re, re), 1e-300)) return b;
    }
    return a;
}

}  // namespace kpp
