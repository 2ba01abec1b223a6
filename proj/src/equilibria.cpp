#include "kpp/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "kpp/format.hpp"
#include "kpp/generators.hpp"

namespace kpp {

Vector equilibrium_residual(const SystemSpec& spec, std::span<const double> u) {
    const Vector mu = spec.M() * u;
    const Vector cu = spec.C() * u;
    Vector f(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) f[i] = mu[i] + u[i] - u[i] * cu[i];
    return f;
}

DenseMatrix equilibrium_jacobian(const SystemSpec& spec, std::span<const double> u) {
    const std::size_t n = spec.n();
    const Vector cu = spec.C() * u;
    DenseMatrix j = spec.M();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) j(r, c) -= u[r] * spec.C()(r, c);
        j(r, r) += 1.0 - cu[r];
    }
    return j;
}

Equilibrium make_equilibrium(const SystemSpec& spec, Vector u) {
    Equilibrium e;
    e.residual = norm_inf(equilibrium_residual(spec, u));
    e.jacobian_spectrum = spectrum(equilibrium_jacobian(spec, u));
    e.stable = e.jacobian_spectrum.max_real() < 0.0;
    e.positive = *std::min_element(u.begin(), u.end()) > boundary_cutoff;
    e.u = std::move(u);
    return e;
}

namespace {

// Positive roots of F are the roots of G(u) = (Mu)/u + 1 - Cu, which has no
// root at 0. Newton runs on G in w = log u, so iterates stay positive.
Vector divided_residual(const SystemSpec& spec, std::span<const double> u) {
    const Vector mu = spec.M() * u;
    const Vector cu = spec.C() * u;
    Vector g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = mu[i] / u[i] + 1.0 - cu[i];
    return g;
}

// dG_i/dw_j = m_ij u_j / u_i - delta_ij (Mu)_i / u_i - c_ij u_j
DenseMatrix divided_jacobian(const SystemSpec& spec, std::span<const double> u) {
    const std::size_t n = spec.n();
    const Vector mu = spec.M() * u;
    DenseMatrix j(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) j(r, c) = spec.M()(r, c) * u[c] / u[r] - spec.C()(r, c) * u[c];
        j(r, r) -= mu[r] / u[r];
    }
    return j;
}

}  // namespace

NewtonOutcome newton_equilibrium(const SystemSpec& spec, std::span<const double> u0, const NewtonOptions& opt) {
    if (u0.size() != spec.n()) throw MalformedInput("newton_equilibrium: dimension mismatch");
    for (double x : u0)
        if (!std::isfinite(x) || !(x > 0.0)) throw PreconditionError("newton_equilibrium: start must be positive");

    const std::size_t n = spec.n();
    const double log_floor = std::log(opt.floor);
    const double log_ceiling = std::log(1e10);
    NewtonOutcome out;
    Vector u(u0.begin(), u0.end());
    Vector w(n), trial_w(n), trial_u(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::log(u[i]);
    Vector g = divided_residual(spec, u);
    double gr = norm_inf(g);

    // Once |F| <= tol the iteration keeps polishing until the step stalls:
    // at a degenerate root |F| is cubic in the error and meets tol early.
    double last_step = std::numeric_limits<double>::infinity();
    for (out.iterations = 0;; ++out.iterations) {
        if (!out.converged && norm_inf(equilibrium_residual(spec, u)) <= opt.tol) out.converged = true;
        if (out.converged && (gr == 0.0 || last_step <= 1e-13)) break;
        if (out.iterations >= opt.max_iter) {
            if (!out.converged) out.reason = "max-iterations";
            break;
        }
        DenseMatrix jac = divided_jacobian(spec, u);
        auto lu = LuFactor<double>::factor(jac);
        if (!lu) {
            // Levenberg-style retry on a singular Jacobian.
            const double shift = 1e-8 * std::max(1.0, inf_norm(jac));
            for (std::size_t i = 0; i < n; ++i) jac(i, i) -= shift;
            lu = LuFactor<double>::factor(std::move(jac));
            if (!lu) {
                if (!out.converged) out.reason = "singular-jacobian";
                break;
            }
        }
        const Vector delta = lu->solve(g);

        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, lambda *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) {
                trial_w[i] = std::clamp(w[i] - lambda * delta[i], log_floor, log_ceiling);
                trial_u[i] = std::exp(trial_w[i]);
            }
            Vector gt = divided_residual(spec, trial_u);
            const double rt = norm_inf(gt);
            if (rt < gr) {
                last_step = 0.0;
                for (std::size_t i = 0; i < n; ++i) last_step = std::max(last_step, std::abs(trial_w[i] - w[i]));
                w = trial_w;
                u = trial_u;
                g = std::move(gt);
                gr = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!out.converged) out.reason = "no-descent";
            break;
        }
        if (!all_finite(u) || norm_inf(u) > 1e8) {
            out.reason = "diverged";
            break;
        }
    }
    out.equilibrium = make_equilibrium(spec, std::move(u));
    return out;
}

namespace {

bool lex_less(const Equilibrium& a, const Equilibrium& b) {
    return std::lexicographical_compare(a.u.begin(), a.u.end(), b.u.begin(), b.u.end());
}

double sup_distance(const Vector& a, const Vector& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// A root of multiplicity m is only resolved to about eps^(1/m), so roots at a
// bifurcation point scatter well beyond 1e-6 and need a wider merge radius.
bool nearly_singular(const Equilibrium& e) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& z : e.jacobian_spectrum.eigenvalues) lo = std::min(lo, std::abs(z));
    return lo <= 1e-6;
}

struct Root {
    std::size_t start;
    Equilibrium eq;
};

// Merges roots within 1e-6 of each other (1e-3 between nearly singular
// ones), keeping the smallest residual and,
// on ties, the earliest start (so an exact 1 beats its rounding neighbours).
std::vector<Equilibrium> deduplicate(std::vector<Root> roots) {
    std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) {
        if (lex_less(a.eq, b.eq)) return true;
        if (lex_less(b.eq, a.eq)) return false;
        return a.start < b.start;
    });
    std::vector<Root> kept;
    for (auto& r : roots) {
        auto hit = std::find_if(kept.begin(), kept.end(), [&](const Root& k) {
            const double d = sup_distance(k.eq.u, r.eq.u);
            return d <= 1e-6 || (d <= 1e-3 && nearly_singular(k.eq) && nearly_singular(r.eq));
        });
        if (hit == kept.end())
            kept.push_back(std::move(r));
        else if (r.eq.residual < hit->eq.residual ||
                 (r.eq.residual == hit->eq.residual && r.start < hit->start))
            *hit = std::move(r);
    }
    std::vector<Equilibrium> out;
    for (auto& k : kept) out.push_back(std::move(k.eq));
    std::sort(out.begin(), out.end(), lex_less);
    return out;
}

}  // namespace

EquilibriumSet find_all_equilibria(const SystemSpec& spec, int n_starts, std::uint64_t seed, double tol) {
    if (n_starts < 1) throw PreconditionError("find_all_equilibria: n_starts must be >= 1");
    const std::size_t n = spec.n();

    std::vector<Vector> starts;
    starts.push_back(ones(n));
    for (std::size_t s = 0; s < n; ++s) {
        Vector v(n, 0.1);
        v[s] = 2.0;
        starts.push_back(std::move(v));
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> lu(std::log(1e-3), std::log(10.0));
    for (int k = 0; k < n_starts; ++k) {
        Vector v(n);
        for (auto& x : v) x = std::exp(lu(rng));
        starts.push_back(std::move(v));
    }

    EquilibriumSet out;
    out.starts = static_cast<int>(starts.size());
    std::vector<Root> pos, bnd;
    NewtonOptions opt;
    opt.tol = tol;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        auto res = newton_equilibrium(spec, starts[k], opt);
        if (!res.converged || res.equilibrium.residual > tol) continue;
        ++out.converged;
        (res.equilibrium.positive ? pos : bnd).push_back({k, std::move(res.equilibrium)});
    }
    out.positive = deduplicate(std::move(pos));
    out.boundary = deduplicate(std::move(bnd));
    return out;
}

BifurcationDiagram bifurcation_scan_n2(double gamma, double sigma_lo, double sigma_hi, int n_samples,
                                       std::uint64_t seed, int n_starts, double threshold_tol) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("bifurcation_scan_n2: gamma must lie in (0,1)");
    if (!(sigma_lo > 0.0 && sigma_hi > sigma_lo)) throw PreconditionError("bifurcation_scan_n2: bad sigma range");
    if (n_samples < 2) throw PreconditionError("bifurcation_scan_n2: need at least two samples");

    auto exponent = [&](double sigma) {
        const auto spec = two_component_system(gamma, sigma);
        return spectrum(equilibrium_jacobian(spec, ones(2))).max_real();
    };

    BifurcationDiagram d;
    d.parameter_name = "sigma";
    for (int k = 0; k < n_samples; ++k) {
        const double s = sigma_lo + (sigma_hi - sigma_lo) * k / (n_samples - 1);
        d.parameter_samples.push_back(s);
        d.branches.push_back(find_all_equilibria(two_component_system(gamma, s), n_starts, seed).positive);
        d.max_real_at_one.push_back(exponent(s));
    }
    for (int k = 0; k + 1 < n_samples; ++k) {
        double a = d.parameter_samples[k], b = d.parameter_samples[k + 1];
        double fa = d.max_real_at_one[k], fb = d.max_real_at_one[k + 1];
        if (d.branches[k].size() != d.branches[k + 1].size()) d.count_changes.push_back(0.5 * (a + b));
        if ((fa < 0.0) == (fb < 0.0)) continue;
        while (b - a > threshold_tol) {
            const double m = 0.5 * (a + b);
            const double fm = exponent(m);
            if ((fm < 0.0) == (fa < 0.0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        d.detected_thresholds.push_back(0.5 * (a + b));
    }
    return d;
}

void write_equilibria_csv(std::ostream& os, const std::vector<Equilibrium>& eqs, bool header) {
    std::size_t width = 0;
    for (const auto& e : eqs) width = std::max(width, e.u.size());
    if (header) {
        os << "n";
        for (std::size_t i = 1; i <= width; ++i) os << ",u_" << i;
        os << ",residual,max_re_jacobian,stable\n";
    }
    for (const auto& e : eqs) {
        os << e.u.size();
        for (std::size_t i = 0; i < width; ++i) os << ',' << (i < e.u.size() ? fmt(e.u[i]) : std::string());
        os << ',' << fmt(e.residual) << ',' << fmt(e.max_real()) << ',' << (e.stable ? 1 : 0) << '\n';
    }
}

}  // namespace kpp
