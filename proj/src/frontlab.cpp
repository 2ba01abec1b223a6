#include "kpp/frontlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "kpp/format.hpp"
#include "kpp/inequalities.hpp"

namespace kpp {

SpatialGrid::SpatialGrid(double lo, double hi, std::size_t n) : x_min(lo), x_max(hi), n_points(n) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo)) throw MalformedInput("SpatialGrid: need x_min < x_max");
    if (n < 3) throw MalformedInput("SpatialGrid: need at least 3 points");
}

std::size_t SpatialGrid::index_of(double x) const {
    const double k = std::round((x - x_min) / dx());
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n_points - 1)));
}

bool FieldState::positive() const {
    return std::all_of(values.data().begin(), values.data().end(), [](double v) { return v > 0.0; });
}

bool FieldState::nonnegative() const {
    return std::all_of(values.data().begin(), values.data().end(), [](double v) { return v >= 0.0; });
}

double FieldState::total(std::size_t j) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.rows(); ++i) s += values(i, j);
    return s;
}

FieldState uniform_state(const SpatialGrid& grid, std::span<const double> level) {
    FieldState s;
    s.grid = grid;
    s.values = DenseMatrix(level.size(), grid.n_points);
    for (std::size_t i = 0; i < level.size(); ++i)
        for (std::size_t j = 0; j < grid.n_points; ++j) s.values(i, j) = level[i];
    return s;
}

std::string to_string(Scheme s) { return s == Scheme::imex ? "imex" : "rk4"; }

Scheme parse_scheme(const std::string& s) {
    if (s == "imex") return Scheme::imex;
    if (s == "rk4") return Scheme::rk4;
    throw MalformedInput("unknown scheme '" + s + "'");
}

double max_stable_dt(const SystemSpec& spec, const SpatialGrid& grid, Scheme scheme, double sup_u) {
    if (scheme == Scheme::rk4) {
        const double dmax = *std::max_element(spec.d().begin(), spec.d().end());
        return 0.4 * grid.dx() * grid.dx() / dmax;
    }
    double cmax = 0.0;
    for (double c : spec.C().data()) cmax = std::max(cmax, std::abs(c));
    return 0.5 / (1.0 + inf_norm(spec.M()) + static_cast<double>(spec.n()) * cmax * std::max(sup_u, 1.0));
}

Integrator::Integrator(const SystemSpec& spec, const SpatialGrid& grid, Scheme scheme, double dt)
    : spec_(spec), grid_(grid), scheme_(scheme), dt_(dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("Integrator: dt must be positive");
    const auto& c = spec_.C();
    for (std::size_t i = 0; i < spec_.n(); ++i) {
        std::size_t r = 0;
        while (r < i && !std::ranges::equal(c.row(r), c.row(i))) ++r;
        c_row_rep_.push_back(r);
    }
    if (scheme_ != Scheme::imex) return;
    const std::size_t n = grid_.n_points, comps = spec_.n();
    sweep_upper_ = DenseMatrix(comps, n);
    sweep_inv_pivot_ = DenseMatrix(comps, n);
    const double h2 = grid_.dx() * grid_.dx();
    for (std::size_t i = 0; i < comps; ++i) {
        const double r = dt_ * spec_.d()[i] / h2;
        // Rows: (1+2r, -2r), (-r, 1+2r, -r) ..., (-2r, 1+2r); the factor 2 is the ghost reflection.
        double pivot = 1.0 + 2.0 * r;
        sweep_inv_pivot_(i, 0) = 1.0 / pivot;
        sweep_upper_(i, 0) = -2.0 * r / pivot;
        for (std::size_t j = 1; j < n; ++j) {
            const double lower = (j + 1 == n) ? -2.0 * r : -r;
            pivot = 1.0 + 2.0 * r - lower * sweep_upper_(i, j - 1);
            sweep_inv_pivot_(i, j) = 1.0 / pivot;
            sweep_upper_(i, j) = (j + 1 == n) ? 0.0 : -r / pivot;
        }
    }
}

void Integrator::reaction(const DenseMatrix& u, DenseMatrix& out) const {
    // Row-wise axpys so the inner loop runs along x with unit stride.
    const std::size_t comps = u.rows(), n = u.cols();
    const auto& m = spec_.M();
    const auto& c = spec_.C();
    if (cu_.rows() != comps || cu_.cols() != n) cu_ = DenseMatrix(comps, n);
    for (std::size_t i = 0; i < comps; ++i) {
        auto ci = cu_.row(c_row_rep_[i]);
        if (c_row_rep_[i] == i) {
            std::fill(ci.begin(), ci.end(), 0.0);
            for (std::size_t k = 0; k < comps; ++k)
                if (const double b = c(i, k); b != 0.0) {
                    const auto uk = u.row(k);
                    for (std::size_t j = 0; j < n; ++j) ci[j] += b * uk[j];
                }
        }
        auto o = out.row(i);
        const auto ui = u.row(i);
        for (std::size_t j = 0; j < n; ++j) o[j] = ui[j] * (1.0 - ci[j]);
        for (std::size_t k = 0; k < comps; ++k)
            if (const double a = m(i, k); a != 0.0) {
                const auto uk = u.row(k);
                for (std::size_t j = 0; j < n; ++j) o[j] += a * uk[j];
            }
    }
}

void Integrator::diffusion(const DenseMatrix& u, DenseMatrix& out) const {
    const std::size_t n = u.cols();
    const double h2 = grid_.dx() * grid_.dx();
    for (std::size_t i = 0; i < u.rows(); ++i) {
        const double k = spec_.d()[i] / h2;
        out(i, 0) = 2.0 * k * (u(i, 1) - u(i, 0));
        for (std::size_t j = 1; j + 1 < n; ++j) out(i, j) = k * (u(i, j - 1) - 2.0 * u(i, j) + u(i, j + 1));
        out(i, n - 1) = 2.0 * k * (u(i, n - 2) - u(i, n - 1));
    }
}

void Integrator::implicit_diffusion(DenseMatrix& u) const {
    const std::size_t n = u.cols();
    const double h2 = grid_.dx() * grid_.dx();
    for (std::size_t i = 0; i < u.rows(); ++i) {
        const double r = dt_ * spec_.d()[i] / h2;
        auto row = u.row(i);
        row[0] *= sweep_inv_pivot_(i, 0);
        for (std::size_t j = 1; j < n; ++j) {
            const double lower = (j + 1 == n) ? -2.0 * r : -r;
            row[j] = (row[j] - lower * row[j - 1]) * sweep_inv_pivot_(i, j);
        }
        for (std::size_t j = n - 1; j-- > 0;) row[j] -= sweep_upper_(i, j) * row[j + 1];
    }
}

void Integrator::step(FieldState& s) const {
    auto& u = s.values;
    if (rate_.rows() != u.rows() || rate_.cols() != u.cols()) rate_ = DenseMatrix(u.rows(), u.cols());
    DenseMatrix& k1 = rate_;
    if (scheme_ == Scheme::imex) {
        reaction(u, k1);
        for (std::size_t q = 0; q < u.data().size(); ++q) u.data()[q] += dt_ * k1.data()[q];
        implicit_diffusion(u);
    } else {
        DenseMatrix tmp(u.rows(), u.cols()), stage(u.rows(), u.cols()), acc = u;
        auto rhs = [&](const DenseMatrix& x, DenseMatrix& out) {
            reaction(x, out);
            diffusion(x, tmp);
            for (std::size_t q = 0; q < out.data().size(); ++q) out.data()[q] += tmp.data()[q];
        };
        const double w[4] = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
        const double a[4] = {0.0, 0.5, 0.5, 1.0};
        DenseMatrix k(u.rows(), u.cols());
        for (int st = 0; st < 4; ++st) {
            if (st == 0) {
                rhs(u, k);
            } else {
                for (std::size_t q = 0; q < u.data().size(); ++q) stage.data()[q] = u.data()[q] + a[st] * dt_ * k.data()[q];
                rhs(stage, k);
            }
            for (std::size_t q = 0; q < u.data().size(); ++q) acc.data()[q] += w[st] * dt_ * k.data()[q];
        }
        u = std::move(acc);
    }
    s.t += dt_;
}

namespace {

void verify_state(const FieldState& s) {
    double sup = 0.0, lo = 0.0;
    for (double v : s.values.data()) {
        if (!std::isfinite(v)) throw IntegrationError("non-finite value", s.t);
        sup = std::max(sup, v);
        lo = std::min(lo, v);
    }
    if (lo < -1e-10 * std::max(1.0, sup)) throw IntegrationError("positivity lost (step too large)", s.t);
}

double pick_dt(double requested, double bound) { return requested > 0.0 ? requested : std::min(0.05, 0.9 * bound); }

double sup_value(const FieldState& s) {
    double m = 0.0;
    for (double v : s.values.data()) m = std::max(m, v);
    return m;
}

}  // namespace

std::vector<FieldState> simulate(const SystemSpec& spec, FieldState u0, const SimulateOptions& opt) {
    if (u0.values.rows() != spec.n() || u0.values.cols() != u0.grid.n_points)
        throw MalformedInput("simulate: state does not match the system or grid");
    if (!u0.nonnegative()) throw PreconditionError("simulate: initial state must be nonnegative");
    if (!(opt.t_end >= 0.0)) throw PreconditionError("simulate: t_end must be nonnegative");

    const double bound = max_stable_dt(spec, u0.grid, opt.scheme, sup_value(u0));
    double dt = pick_dt(opt.dt, bound);
    if (opt.enforce_dt_bound && dt > bound * (1.0 + 1e-12))
        throw PreconditionError("simulate: dt " + fmt(dt) + " exceeds the stability bound " + fmt(bound));

    std::vector<FieldState> out{u0};
    if (opt.t_end == 0.0) return out;
    const auto steps = static_cast<std::size_t>(std::ceil(opt.t_end / dt - 1e-9));
    dt = opt.t_end / static_cast<double>(steps);
    const double t0 = u0.t;
    Integrator integ(spec, u0.grid, opt.scheme, dt);

    Vector pending = opt.snapshot_times;
    std::sort(pending.begin(), pending.end());
    std::size_t next = 0;
    FieldState s = std::move(u0);
    for (std::size_t k = 1; k <= steps; ++k) {
        integ.step(s);
        s.t = t0 + dt * static_cast<double>(k);
        verify_state(s);
        if (opt.observer) opt.observer(s);
        while (next < pending.size() && pending[next] <= s.t - t0 + 1e-9 * dt) {
            if (k < steps) out.push_back(s);
            ++next;
        }
    }
    out.push_back(std::move(s));
    return out;
}

double parabolic_lyapunov(const FieldState& u) { return parabolic_lyapunov(u.values, u.grid.dx()); }

std::string to_string(WakeVerdict v) {
    switch (v) {
        case WakeVerdict::converged: return "converged";
        case WakeVerdict::oscillatory: return "oscillatory";
        default: return "undetermined";
    }
}

namespace {

// Rightmost crossing of sum_i u_i = N/2, linearly interpolated.
double front_position(const FieldState& s) {
    const double level = 0.5 * static_cast<double>(s.components());
    const std::size_t n = s.grid.n_points;
    for (std::size_t j = n; j-- > 0;) {
        const double tj = s.total(j);
        if (tj < level) continue;
        if (j + 1 == n) return s.grid.x_max;
        const double tn = s.total(j + 1);
        return s.grid.x(j) + (tj - level) / (tj - tn) * s.grid.dx();
    }
    return s.grid.x_min;
}

double lsq_slope(const Vector& t, const Vector& x) {
    double mt = 0.0, mx = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) mt += t[k], mx += x[k];
    mt /= static_cast<double>(t.size());
    mx /= static_cast<double>(t.size());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        num += (t[k] - mt) * (x[k] - mx);
        den += (t[k] - mt) * (t[k] - mt);
    }
    return den > 0.0 ? num / den : 0.0;
}

// Drops k cells on the left, pads zeros on the right.
void shift_frame(FieldState& s, std::size_t k) {
    const std::size_t n = s.grid.n_points;
    for (std::size_t i = 0; i < s.values.rows(); ++i) {
        auto row = s.values.row(i);
        std::copy(row.begin() + static_cast<std::ptrdiff_t>(k), row.end(), row.begin());
        std::fill(row.end() - static_cast<std::ptrdiff_t>(k), row.end(), 0.0);
    }
    const double h = s.grid.dx();
    s.grid.x_min += h * static_cast<double>(k);
    s.grid.x_max = s.grid.x_min + h * static_cast<double>(n - 1);
}

double amplitude(const Vector& t, const Vector& v, double lo, double hi) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= lo && t[k] <= hi) mn = std::min(mn, v[k]), mx = std::max(mx, v[k]);
    return mx >= mn ? mx - mn : 0.0;
}

}  // namespace

FrontResult front_experiment(const SystemSpec& spec, const FrontOptions& opt) {
    const double L = opt.domain_length;
    if (!(L > 0.0 && opt.dx > 0.0 && opt.t_end > 0.0)) throw PreconditionError("front_experiment: bad geometry");
    const auto n = static_cast<std::size_t>(std::llround(L / opt.dx)) + 1;
    const std::size_t comps = spec.n();

    FieldState s;
    s.grid = SpatialGrid(0.0, opt.dx * static_cast<double>(n - 1), n);
    s.values = DenseMatrix(comps, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double v = std::min(1.0, std::exp(-(s.grid.x(j) - opt.x0)));
        for (std::size_t i = 0; i < comps; ++i) s.values(i, j) = v * (i == 0 ? 1.0 + opt.perturbation : 1.0);
    }

    const double bound = max_stable_dt(spec, s.grid, opt.scheme, sup_value(s));
    double dt = pick_dt(opt.dt, bound);
    if (dt > bound * (1.0 + 1e-12)) throw PreconditionError("front_experiment: dt exceeds the stability bound");
    const auto steps = static_cast<std::size_t>(std::ceil(opt.t_end / dt - 1e-9));
    dt = opt.t_end / static_cast<double>(steps);
    const auto record_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.record_interval / dt)));
    Integrator integ(spec, s.grid, opt.scheme, dt);

    FrontResult out;
    out.dt = dt;
    const std::size_t station = s.grid.index_of(L / 4.0);
    auto record = [&] {
        out.times.push_back(s.t);
        out.positions.push_back(front_position(s));
        out.station_totals.push_back(s.total(station));
    };
    record();

    Vector pending = opt.snapshot_times;
    std::sort(pending.begin(), pending.end());
    std::size_t next = 0;
    for (std::size_t k = 1; k <= steps; ++k) {
        integ.step(s);
        s.t = dt * static_cast<double>(k);
        verify_state(s);
        const double x = front_position(s);
        if (x > s.grid.x_max - L / 20.0 && !opt.comoving)
            throw DomainTooShort("front reached the right end of the domain", s.t);
        if (opt.comoving && x > s.grid.x_min + 0.7 * L) {
            const auto cells = static_cast<std::size_t>(std::llround((x - s.grid.x_min - 0.5 * L) / opt.dx));
            shift_frame(s, cells);
            out.frame_shift += opt.dx * static_cast<double>(cells);
        }
        if (k % record_every == 0 || k == steps) record();
        while (next < pending.size() && pending[next] <= s.t + 1e-9 * dt) {
            out.snapshots.push_back(s);
            ++next;
        }
    }

    Vector tt, xx;
    for (std::size_t k = 0; k < out.times.size(); ++k)
        if (out.times[k] >= 2.0 * opt.t_end / 3.0) tt.push_back(out.times[k]), xx.push_back(out.positions[k]);
    out.measured_speed = lsq_slope(tt, xx);

    auto& w = out.wake;
    w.window_lo = s.grid.x_min + L / 10.0;
    w.window_hi = out.positions.back() - L / 5.0;
    w.station = L / 4.0;
    if (!(w.window_hi > w.window_lo)) throw DomainTooShort("wake window is empty", s.t);
    const std::size_t a = s.grid.index_of(w.window_lo), b = s.grid.index_of(w.window_hi);
    w.wake_mean.assign(comps, 0.0);
    for (std::size_t i = 0; i < comps; ++i) {
        for (std::size_t j = a; j <= b; ++j) {
            w.sup_deviation = std::max(w.sup_deviation, std::abs(s.values(i, j) - 1.0));
            w.wake_mean[i] += s.values(i, j);
        }
        w.wake_mean[i] /= static_cast<double>(b - a + 1);
        for (std::size_t j = a; j <= b; ++j)
            w.wake_spread = std::max(w.wake_spread, std::abs(s.values(i, j) - w.wake_mean[i]));
    }
    const double T = opt.t_end;
    w.oscillation_amplitude = amplitude(out.times, out.station_totals, 0.75 * T, T);
    const bool sustained = amplitude(out.times, out.station_totals, 0.75 * T, 0.875 * T) > wake_threshold &&
                           amplitude(out.times, out.station_totals, 0.875 * T, T) > wake_threshold;
    if (w.sup_deviation < wake_threshold)
        w.verdict = WakeVerdict::converged;
    else if (sustained)
        w.verdict = WakeVerdict::oscillatory;
    else
        w.verdict = WakeVerdict::undetermined;

    out.final_state = std::move(s);
    return out;
}

// ---------------------------------------------------------------------------
// Linear spreading speed

namespace {

void require_a1(const DenseMatrix& m) {
    const double tol = 1e-10;
    if (!check_essentially_nonnegative(m, tol).ok() || !check_irreducible(m).ok() ||
        !check_line_sum_symmetric(m, tol).ok() || !check_zero_row_sums(m, tol).ok())
        throw PreconditionError("minimal_speed: M does not satisfy A1");
}

double pf_of(const SystemSpec& spec, double mu) {
    DenseMatrix a = spec.M();
    for (std::size_t i = 0; i < spec.n(); ++i) a(i, i) += mu * mu * spec.d()[i] + 1.0;
    return perron_eigenpair(a).value;
}

}  // namespace

SpeedEstimate linear_spreading_speed(const SystemSpec& spec) {
    require_a1(spec.M());
    auto f = [&](double s) { return pf_of(spec, std::exp(s)) / std::exp(s); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::log(1e-3), b = std::log(1e3);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > 1e-10) {
        if (f1 <= f2) {
            b = x2, x2 = x1, f2 = f1;
            x1 = b - g * (b - a), f1 = f(x1);
        } else {
            a = x1, x1 = x2, f1 = f2;
            x2 = a + g * (b - a), f2 = f(x2);
        }
    }
    const double s = 0.5 * (a + b);
    return {f(s), std::exp(s)};
}

double minimal_speed(const SystemSpec& spec) { return linear_spreading_speed(spec).c; }

// ---------------------------------------------------------------------------
// Travelling-wave boundary value problem

namespace {

struct WaveSystem {
    const SystemSpec& spec;
    double c, h;
    std::size_t n;       // grid points
};

// Equation at interior node j, divided by p_i(xi_j), in terms of q = log p.
// q is N x n with fixed end columns.
double wave_equations(const WaveSystem& w, const DenseMatrix& q, DenseMatrix& e) {
    const std::size_t comps = w.spec.n();
    const auto& m = w.spec.M();
    const auto& cm = w.spec.C();
    double sup = 0.0;
    Vector p(comps);
    for (std::size_t j = 1; j + 1 < w.n; ++j) {
        for (std::size_t k = 0; k < comps; ++k) p[k] = std::exp(q(k, j));
        for (std::size_t i = 0; i < comps; ++i) {
            const double a = std::exp(q(i, j + 1) - q(i, j)), b = std::exp(q(i, j - 1) - q(i, j));
            const double di = w.spec.d()[i];
            double mp = 0.0, cp = 0.0;
            for (std::size_t k = 0; k < comps; ++k) {
                mp += m(i, k) * (k == i ? 1.0 : std::exp(q(k, j) - q(i, j)));
                cp += cm(i, k) * p[k];
            }
            const double v = -di * (a - 2.0 + b) / (w.h * w.h) - w.c * (a - b) / (2.0 * w.h) - (mp + 1.0 - cp);
            e(i, j) = v;
            sup = std::max(sup, std::abs(v));
        }
    }
    if (!std::isfinite(sup)) return std::numeric_limits<double>::infinity();
    return sup;
}

// Block-tridiagonal Newton step: J dq = -e on interior nodes.
bool wave_newton_step(const WaveSystem& w, const DenseMatrix& q, const DenseMatrix& e, DenseMatrix& dq) {
    const std::size_t comps = w.spec.n();
    const std::size_t inner = w.n - 2;
    const auto& m = w.spec.M();
    const auto& cm = w.spec.C();
    const double h = w.h, c = w.c;

    std::vector<DenseMatrix> g(inner);  // D'^{-1} U per node
    DenseMatrix y(comps, inner);
    for (std::size_t jj = 0; jj < inner; ++jj) {
        const std::size_t j = jj + 1;
        DenseMatrix blk(comps, comps);
        Vector lower(comps), upper(comps), rhs(comps);
        for (std::size_t i = 0; i < comps; ++i) {
            const double a = std::exp(q(i, j + 1) - q(i, j)), b = std::exp(q(i, j - 1) - q(i, j));
            const double di = w.spec.d()[i];
            upper[i] = -di * a / (h * h) - c * a / (2.0 * h);
            lower[i] = -di * b / (h * h) + c * b / (2.0 * h);
            blk(i, i) = di * (a + b) / (h * h) + c * (a - b) / (2.0 * h);
            for (std::size_t k = 0; k < comps; ++k) {
                const double pk = std::exp(q(k, j));
                if (k == i) {
                    blk(i, i) += cm(i, i) * pk;
                } else {
                    const double r = m(i, k) * std::exp(q(k, j) - q(i, j));
                    blk(i, k) += -r + cm(i, k) * pk;
                    blk(i, i) += r;
                }
            }
            rhs[i] = -e(i, j);
        }
        if (jj > 0) {
            const DenseMatrix& gp = g[jj - 1];
            for (std::size_t i = 0; i < comps; ++i) {
                for (std::size_t k = 0; k < comps; ++k) blk(i, k) -= lower[i] * gp(i, k);
                rhs[i] -= lower[i] * y(i, jj - 1);
            }
        }
        auto lu = LuFactor<double>::factor(blk);
        if (!lu) return false;
        DenseMatrix up(comps, comps);
        for (std::size_t i = 0; i < comps; ++i) up(i, i) = upper[i];
        g[jj] = lu->solve(up);
        const Vector sol = lu->solve(rhs);
        for (std::size_t i = 0; i < comps; ++i) y(i, jj) = sol[i];
    }
    dq = DenseMatrix(comps, w.n);
    for (std::size_t jj = inner; jj-- > 0;) {
        for (std::size_t i = 0; i < comps; ++i) {
            double v = y(i, jj);
            if (jj + 1 < inner)
                for (std::size_t k = 0; k < comps; ++k) v -= g[jj](i, k) * dq(k, jj + 2);
            dq(i, jj + 1) = v;
        }
    }
    return true;
}

// sup over interior nodes of | -D p'' - c p' - (Mp + p - p o Cp) |.
double wave_residual(const SystemSpec& spec, double c, const SpatialGrid& grid, const DenseMatrix& p) {
    const std::size_t comps = spec.n();
    const double h = grid.dx();
    double sup = 0.0;
    Vector col(comps);
    for (std::size_t j = 1; j + 1 < grid.n_points; ++j) {
        for (std::size_t k = 0; k < comps; ++k) col[k] = p(k, j);
        const Vector mp = spec.M() * col, cp = spec.C() * col;
        for (std::size_t i = 0; i < comps; ++i) {
            const double lap = (p(i, j + 1) - 2.0 * p(i, j) + p(i, j - 1)) / (h * h);
            const double adv = (p(i, j + 1) - p(i, j - 1)) / (2.0 * h);
            const double r = -spec.d()[i] * lap - c * adv - (mp[i] + col[i] - col[i] * cp[i]);
            sup = std::max(sup, std::abs(r));
        }
    }
    return sup;
}

// Slow decay rate: the smaller root of lambda_PF(mu^2 D + M + I) = c mu, or
// mu* when c < c*.
double decay_rate(const SystemSpec& spec, double c) {
    const auto star = linear_spreading_speed(spec);
    if (c <= star.c) return star.mu;
    double lo = 0.0, hi = star.mu;
    while (hi - lo > 1e-13 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (pf_of(spec, mid) - c * mid > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

void fill_profile_diagnostics(WaveProfile& w) {
    const std::size_t n = w.grid.n_points;
    double rb = 0.0, lc = 0.0, mn = std::numeric_limits<double>::infinity();
    const std::size_t probe = w.grid.index_of(w.grid.x_min + 5.0);
    for (std::size_t i = 0; i < w.values.rows(); ++i) {
        rb = std::max(rb, std::abs(w.values(i, n - 1)));
        lc = std::max(lc, std::abs(w.values(i, probe) - 1.0));
        for (std::size_t j = 0; j < n; ++j) mn = std::min(mn, w.values(i, j));
    }
    w.right_boundary_norm = rb;
    w.left_closeness = lc;
    w.min_value = mn;
}

}  // namespace

WaveProfile solve_wave_profile(const SystemSpec& spec, double c, double R, std::size_t n_points,
                               const WaveOptions& opt) {
    if (!(c >= 0.0)) throw PreconditionError("solve_wave_profile: speed must be nonnegative");
    if (!(R > 0.0)) throw PreconditionError("solve_wave_profile: R must be positive");
    const std::size_t comps = spec.n();

    WaveProfile out;
    out.grid = SpatialGrid(-R, R, n_points);
    out.speed = c;
    out.d = spec.d();
    const double h = out.grid.dx();

    double q_right = 0.0;
    if (opt.right_level) {
        if (!(*opt.right_level > 0.0)) throw PreconditionError("solve_wave_profile: right level must be positive");
        q_right = std::log(*opt.right_level);
        out.decay_rate = decay_rate(spec, c);
    } else {
        out.decay_rate = decay_rate(spec, c);
        q_right = std::log(opt.delta) - out.decay_rate * R;
    }

    DenseMatrix q(comps, n_points);
    if (opt.initial_guess) {
        const auto& g = *opt.initial_guess;
        if (g.rows() != comps || g.cols() != n_points) throw MalformedInput("solve_wave_profile: guess shape");
        for (std::size_t k = 0; k < g.data().size(); ++k) {
            if (!(g.data()[k] > 0.0)) throw PreconditionError("solve_wave_profile: guess must be positive");
            q.data()[k] = std::log(g.data()[k]);
        }
    } else {
        // log of the logistic 1 / (1 + exp(mu xi)), i.e. a tanh-shaped profile,
        // tilted linearly to meet both end values.
        const double mu = out.decay_rate;
        auto s = [&](double xi) {
            const double z = mu * xi;
            return z > 0.0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
        };
        const double sl = s(-R), sr = s(R);
        for (std::size_t j = 0; j < n_points; ++j) {
            const double xi = out.grid.x(j);
            const double v = s(xi) - sl * (R - xi) / (2 * R) - (sr - q_right) * (xi + R) / (2 * R);
            for (std::size_t i = 0; i < comps; ++i) q(i, j) = v;
        }
    }
    for (std::size_t i = 0; i < comps; ++i) {
        q(i, 0) = 0.0;
        q(i, n_points - 1) = q_right;
    }

    const WaveSystem ws{spec, c, h, n_points};
    DenseMatrix e(comps, n_points), trial(comps, n_points), et(comps, n_points), dq;
    double r = wave_equations(ws, q, e);
    bool reached = false;
    for (out.iterations = 0; out.iterations < opt.max_iter; ++out.iterations) {
        if (r <= 1e-11) reached = true;
        if (r <= 1e-13) break;
        if (!wave_newton_step(ws, q, e, dq)) break;
        double lambda = 1.0;
        bool accepted = false;
        for (int half = 0; half <= 40; ++half, lambda *= 0.5) {
            for (std::size_t k = 0; k < q.data().size(); ++k) trial.data()[k] = q.data()[k] + lambda * dq.data()[k];
            const double rt = wave_equations(ws, trial, et);
            if (rt < r) {
                std::swap(q, trial);
                std::swap(e, et);
                r = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    if (r <= 1e-11) reached = true;

    out.values = DenseMatrix(comps, n_points);
    for (std::size_t k = 0; k < q.data().size(); ++k) out.values.data()[k] = std::exp(q.data()[k]);
    out.residual = wave_residual(spec, c, out.grid, out.values);
    out.converged = reached && std::isfinite(out.residual) && out.residual <= opt.tol;
    if (!out.converged) out.reason = "no-profile";
    fill_profile_diagnostics(out);
    return out;
}

WaveProfile profile_from_field(const FieldState& u, const SystemSpec& spec, double c) {
    WaveProfile w;
    w.grid = u.grid;
    w.speed = c;
    w.d = spec.d();
    w.values = u.values;
    w.residual = wave_residual(spec, c, u.grid, u.values);
    w.reason = "snapshot";
    fill_profile_diagnostics(w);
    return w;
}

// ---------------------------------------------------------------------------
// Energy inequality

namespace {

double derivative(const DenseMatrix& p, std::size_t i, std::size_t j, double h) {
    const std::size_t n = p.cols();
    if (j == 0) return (-3.0 * p(i, 0) + 4.0 * p(i, 1) - p(i, 2)) / (2.0 * h);
    if (j + 1 == n) return (3.0 * p(i, n - 1) - 4.0 * p(i, n - 2) + p(i, n - 3)) / (2.0 * h);
    return (p(i, j + 1) - p(i, j - 1)) / (2.0 * h);
}

}  // namespace

EnergyLedger energy_estimate(const WaveProfile& profile, double R_inner) {
    const auto& p = profile.values;
    for (double v : p.data())
        if (!(v > 0.0)) throw PreconditionError("energy_estimate: profile must be positive");
    if (profile.d.size() != p.rows()) throw MalformedInput("energy_estimate: diffusion rates missing");
    const auto& g = profile.grid;
    const double centre = 0.5 * (g.x_min + g.x_max);
    if (!(R_inner > 0.0) || R_inner > 0.5 * g.length() * (1.0 + 1e-12))
        throw PreconditionError("energy_estimate: R_inner must lie in (0, R]");
    const std::size_t a = g.index_of(centre - R_inner), b = g.index_of(centre + R_inner);
    if (b < a + 2) throw PreconditionError("energy_estimate: window too small for the grid");
    const double h = g.dx(), c = profile.speed;

    EnergyLedger led;
    led.R = 0.5 * h * static_cast<double>(b - a);
    auto bracket = [&](std::size_t j, double sign) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.rows(); ++i) {
            const double pi = p(i, j);
            s += profile.d[i] * derivative(p, i, j, h) * (pi - 1.0) / pi + sign * c * (pi - std::log(pi));
        }
        return s;
    };
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = a; j <= b; ++j) {
            const double r = derivative(p, i, j, h) / p(i, j);
            s += (j == a || j == b ? 0.5 : 1.0) * r * r;
        }
        led.lhs += profile.d[i] * s * h;
    }
    led.bracket_left = bracket(a, 1.0);
    led.bracket_right = bracket(b, 1.0);
    led.rhs = led.bracket_right - led.bracket_left;
    led.rhs_opposite_sign = bracket(b, -1.0) - bracket(a, -1.0);
    led.slack = led.rhs - led.lhs;
    led.wake_bracket = std::abs(led.bracket_left - c * static_cast<double>(p.rows()));
    return led;
}

std::vector<EnergyLedger> energy_sweep(const WaveProfile& profile) {
    const double R = 0.5 * profile.grid.length();
    std::vector<EnergyLedger> out;
    for (int k = 4; k <= 8; ++k) out.push_back(energy_estimate(profile, R * k / 8.0));
    return out;
}

// ---------------------------------------------------------------------------
// Export

void write_snapshots_csv(std::ostream& os, const std::vector<FieldState>& states) {
    const std::size_t comps = states.empty() ? 0 : states.front().components();
    os << "t,x";
    for (std::size_t i = 1; i <= comps; ++i) os << ",u_" << i;
    os << '\n';
    for (const auto& s : states)
        for (std::size_t j = 0; j < s.grid.n_points; ++j) {
            os << fmt(s.t) << ',' << fmt(s.grid.x(j));
            for (std::size_t i = 0; i < comps; ++i) os << ',' << fmt(s.values(i, j));
            os << '\n';
        }
}

void write_profile_csv(std::ostream& os, const WaveProfile& p) {
    os << "xi";
    for (std::size_t i = 1; i <= p.values.rows(); ++i) os << ",p_" << i;
    os << '\n';
    for (std::size_t j = 0; j < p.grid.n_points; ++j) {
        os << fmt(p.grid.x(j));
        for (std::size_t i = 0; i < p.values.rows(); ++i) os << ',' << fmt(p.values(i, j));
        os << '\n';
    }
}

std::map<std::string, std::string> profile_record(const WaveProfile& p) {
    return {{"c", fmt(p.speed)},
            {"residual", fmt(p.residual)},
            {"R", fmt(0.5 * p.grid.length())},
            {"n_points", std::to_string(p.grid.n_points)},
            {"converged", p.converged ? "1" : "0"},
            {"reason", p.reason.empty() ? "ok" : p.reason},
            {"iterations", std::to_string(p.iterations)},
            {"decay_rate", fmt(p.decay_rate)},
            {"right_boundary_norm", fmt(p.right_boundary_norm)},
            {"left_closeness", fmt(p.left_closeness)},
            {"min_value", fmt(p.min_value)}};
}

}  // namespace kpp
