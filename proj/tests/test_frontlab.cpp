#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "kpp/equilibria.hpp"
#include "kpp/frontlab.hpp"
#include "kpp/generators.hpp"
#include "kpp/inequalities.hpp"

using namespace kpp;

namespace {

SystemSpec scalar_system(double d = 1.0) { return SystemSpec(Vector{d}, DenseMatrix(1, 1), DenseMatrix(1, 1, 1.0)); }

// Periodic three-site Laplacian with rate sigma and a given competition matrix.
SystemSpec ring_system(double sigma, DenseMatrix c) {
    const Vector s(3, sigma);
    return SystemSpec(Vector(3, 1.0), make_discrete_laplacian(s, Boundary::periodic), std::move(c));
}

SystemSpec uniform_ring() { return ring_system(1.0, DenseMatrix(3, 3, 1.0 / 3.0)); }

SystemSpec hopf_ring() {
    const Vector phi{0.98, 0.01, 0.01};
    return ring_system(0.05, make_circulant(phi));
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST_CASE("the constant state 1 is an exact steady state of both schemes") {
    const auto spec = uniform_ring();
    const SpatialGrid grid(0.0, 50.0, 201);
    for (Scheme s : {Scheme::imex, Scheme::rk4}) {
        CAPTURE(to_string(s));
        SimulateOptions opt;
        opt.scheme = s;
        opt.dt = s == Scheme::imex ? 0.05 : 0.9 * max_stable_dt(spec, grid, s, 1.0);
        opt.t_end = opt.dt * 1e4;
        double worst = 0.0;
        opt.observer = [&](const FieldState& u) {
            for (double v : u.values.data()) worst = std::max(worst, std::abs(v - 1.0));
        };
        const auto tr = simulate(spec, uniform_state(grid, ones(3)), opt);
        CHECK(worst <= 1e-10);
        CHECK(tr.back().t == doctest::Approx(opt.t_end).epsilon(1e-12));
    }
}

TEST_CASE("zero stays zero") {
    const auto spec = hopf_ring();
    SimulateOptions opt;
    opt.t_end = 50.0;
    const auto tr = simulate(spec, uniform_state(SpatialGrid(0.0, 20.0, 81), Vector(3, 0.0)), opt);
    for (double v : tr.back().values.data()) CHECK(v == 0.0);
}

TEST_CASE("small cosine modes follow the linearization") {
    // For M = 0, C = 1 and tiny data, u = eps cos(k x) exp((1 - k^2) t) up to O(eps^2).
    const auto spec = scalar_system();
    const double L = 20.0, k = 2.0 * std::numbers::pi / L, eps = 1e-7, T = 2.0;
    const SpatialGrid grid(0.0, L, 401);
    FieldState u0;
    u0.grid = grid;
    u0.values = DenseMatrix(1, grid.n_points);
    for (std::size_t j = 0; j < grid.n_points; ++j) u0.values(0, j) = eps * (1.0 + 0.5 * std::cos(k * grid.x(j)));

    // The discrete Laplacian eigenvalue replaces -k^2.
    const double h = grid.dx();
    const double lam = -4.0 / (h * h) * std::pow(std::sin(k * h / 2.0), 2);
    for (Scheme s : {Scheme::rk4, Scheme::imex}) {
        CAPTURE(to_string(s));
        SimulateOptions opt;
        opt.scheme = s;
        opt.t_end = T;
        opt.dt = s == Scheme::rk4 ? 0.9 * max_stable_dt(spec, grid, s, 1.0) : 1e-3;
        const auto tr = simulate(spec, u0, opt);
        double err = 0.0;
        for (std::size_t j = 0; j < grid.n_points; ++j) {
            const double exact = eps * (std::exp(T) + 0.5 * std::cos(k * grid.x(j)) * std::exp((1.0 + lam) * T));
            err = std::max(err, std::abs(tr.back().values(0, j) - exact) / (eps * std::exp(T)));
        }
        // rk4 is limited by the O(eps) nonlinearity, imex by its first-order step.
        CHECK(err < (s == Scheme::rk4 ? 1e-5 : 5e-3));
    }
}

TEST_CASE("snapshots land on the requested times") {
    const auto spec = scalar_system();
    SimulateOptions opt;
    opt.t_end = 1.0;
    opt.dt = 0.1;
    opt.snapshot_times = {0.5, 0.3};
    const auto tr = simulate(spec, uniform_state(SpatialGrid(0, 1, 5), Vector{0.5}), opt);
    REQUIRE(tr.size() == 4);
    CHECK(tr[0].t == 0.0);
    CHECK(tr[1].t == doctest::Approx(0.3));
    CHECK(tr[2].t == doctest::Approx(0.5));
    CHECK(tr[3].t == doctest::Approx(1.0));
}

TEST_CASE("step size bound and failure reporting") {
    const auto spec = scalar_system();
    const SpatialGrid grid(0.0, 10.0, 101);
    CHECK(max_stable_dt(spec, grid, Scheme::rk4, 1.0) == doctest::Approx(0.4 * 0.01));
    CHECK(max_stable_dt(spec, grid, Scheme::imex, 1.0) == doctest::Approx(0.25));

    SimulateOptions opt;
    opt.scheme = Scheme::rk4;
    opt.dt = 0.05;
    opt.t_end = 5.0;
    auto u0 = uniform_state(grid, Vector{0.5});
    u0.values(0, 50) = 1.0;
    CHECK_THROWS_AS(simulate(spec, u0, opt), PreconditionError);

    opt.enforce_dt_bound = false;
    try {
        simulate(spec, u0, opt);
        FAIL("an unstable step should fail");
    } catch (const IntegrationError& e) {
        CHECK(e.time() > 0.0);
        CHECK(e.time() <= 5.0);
    }

    u0.values(0, 3) = -1.0;
    CHECK_THROWS_AS(simulate(spec, u0, {}), PreconditionError);
}

TEST_CASE("parabolic Lyapunov functional decreases for D = I") {
    Rng rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const SpatialGrid grid(0.0, 50.0, 201);
    for (int trial = 0; trial < 10; ++trial) {
        const auto spec = random_stable_system(2 + static_cast<std::size_t>(trial) % 7, rng, true);
        FieldState u0;
        u0.grid = grid;
        u0.values = DenseMatrix(spec.n(), grid.n_points);
        for (double& v : u0.values.data()) v = 1.0 + 0.3 * unit(rng);
        SimulateOptions opt;
        opt.t_end = 20.0;
        for (int k = 1; k < 200; ++k) opt.snapshot_times.push_back(0.1 * k);
        const auto tr = simulate(spec, u0, opt);
        const double dt = 0.05;
        for (std::size_t k = 1; k < tr.size(); ++k)
            CHECK(parabolic_lyapunov(tr[k]) <= parabolic_lyapunov(tr[k - 1]) + dt * dt);
        // the functional is minimized at 1, where it equals N * length
        CHECK(parabolic_lyapunov(tr.back()) == doctest::Approx(50.0 * spec.n()).epsilon(1e-6));
    }
}

TEST_CASE("minimal speed") {
    Rng rng(11);
    for (std::size_t n = 2; n <= 6; ++n) {
        const SystemSpec spec(Vector(n, 1.0), random_mutation_matrix(n, rng), DenseMatrix(n, n, 1.0 / n));
        const auto est = linear_spreading_speed(spec);
        CHECK(est.c == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(est.mu == doctest::Approx(1.0).epsilon(1e-4));
    }
    CHECK(minimal_speed(scalar_system(4.0)) == doctest::Approx(4.0).epsilon(1e-9));

    const DenseMatrix bad{{-1.0, 2.0}, {1.0, -1.0}};
    CHECK_THROWS_AS(minimal_speed(SystemSpec(Vector{1, 1}, bad, DenseMatrix(2, 2, 0.5))), PreconditionError);
}

TEST_CASE("minimal speed for unequal diffusion matches the simulated front") {
    const DenseMatrix m{{-1.0, 1.0}, {1.0, -1.0}};
    const SystemSpec ref(Vector{1.0, 4.0}, m, DenseMatrix{{0.75, 0.25}, {0.25, 0.75}});
    const double c = minimal_speed(ref);
    CHECK(c >= 2.0);
    CHECK(c <= 4.0);
    const auto run = front_experiment(ref);
    CHECK(run.measured_speed == doctest::Approx(c).epsilon(0.05));
}

TEST_CASE("front on a uniform ring: speed 2 and a converged wake") {
    const auto spec = uniform_ring();
    const auto run = front_experiment(spec);
    CHECK(run.measured_speed == doctest::Approx(2.0).epsilon(0.025));
    CHECK(std::abs(run.measured_speed - minimal_speed(spec)) < 0.05);
    CHECK(run.wake.verdict == WakeVerdict::converged);
    CHECK(run.wake.sup_deviation < 1e-2);
    CHECK(run.frame_shift > 0.0);

    const auto roots = find_all_equilibria(spec, 64, 0);
    REQUIRE(roots.positive.size() == 1);
    CHECK(sup_distance(run.wake.wake_mean, roots.positive[0].u) < 1e-3);
}

TEST_CASE("Hopf seed: oscillatory wake") {
    const auto spec = hopf_ring();
    const auto sp = spectrum(spec.C());
    bool complex_left = false;
    for (const auto& z : sp.eigenvalues) complex_left |= z.real() < 0.0 && std::abs(z.imag()) > 1e-6;
    REQUIRE(complex_left);

    FrontOptions opt;
    opt.perturbation = 0.01;
    const auto run = front_experiment(spec, opt);
    CHECK(run.wake.verdict == WakeVerdict::oscillatory);
    CHECK(run.wake.oscillation_amplitude > 0.05);
}

TEST_CASE("negative real competition eigenvalue: wake settles on an asymmetric state") {
    const auto spec = two_component_system(0.8, 0.05);
    FrontOptions opt;
    opt.perturbation = 0.01;
    const auto run = front_experiment(spec, opt);
    CHECK(run.wake.sup_deviation > 0.1);
    CHECK(run.wake.verdict != WakeVerdict::converged);
    CHECK(run.wake.wake_spread < 0.05);

    const double u = 2.25 + 1.25 * std::sqrt(3.0), v = 2.25 - 1.25 * std::sqrt(3.0);
    const Vector a{u, v}, b{v, u};
    CHECK(std::min(sup_distance(run.wake.wake_mean, a), sup_distance(run.wake.wake_mean, b)) < 1e-3);

    const auto roots = find_all_equilibria(spec, 64, 0);
    double best = 1e9;
    for (const auto& r : roots.positive) best = std::min(best, sup_distance(run.wake.wake_mean, r.u));
    CHECK(best < 1e-3);
}

TEST_CASE("shifting the initial front shifts X(t)") {
    const auto spec = uniform_ring();
    FrontOptions a, b;
    b.x0 = 60.0;
    const auto ra = front_experiment(spec, a);
    const auto rb = front_experiment(spec, b);
    REQUIRE(ra.times.size() == rb.times.size());
    for (std::size_t k = 0; k < ra.times.size(); ++k) CHECK(rb.positions[k] - ra.positions[k] == doctest::Approx(20.0));
    CHECK(rb.measured_speed == doctest::Approx(ra.measured_speed).epsilon(0.01));
}

TEST_CASE("measured speed converges at second order in dx") {
    const auto spec = uniform_ring();
    Vector speed;
    for (double dx : {0.5, 0.25, 0.125}) {
        FrontOptions opt;
        opt.dx = dx;
        speed.push_back(front_experiment(spec, opt).measured_speed);
    }
    const double extrapolated_error = std::abs(speed[1] - speed[0]) / 3.0;
    CHECK(std::abs(speed[2] - speed[1]) <= 2.0 * extrapolated_error);
}

TEST_CASE("a fixed frame that is too short is reported") {
    FrontOptions opt;
    opt.comoving = false;
    try {
        front_experiment(uniform_ring(), opt);
        FAIL("expected DomainTooShort");
    } catch (const DomainTooShort& e) {
        CHECK(e.time() > 150.0);
        CHECK(e.time() < 200.0);
    }
    opt.t_end = 100.0;
    CHECK_NOTHROW(front_experiment(uniform_ring(), opt));
}

TEST_CASE("scalar Fisher-KPP wave at c = 2") {
    const auto w = solve_wave_profile(scalar_system(), 2.0, 60.0, 1201);
    REQUIRE(w.converged);
    CHECK(w.residual <= 1e-8);
    CHECK(w.decay_rate == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t j = 1; j < w.grid.n_points; ++j) CHECK(w.values(0, j) <= w.values(0, j - 1));
    CHECK(w.values(0, 0) == 1.0);
    CHECK(w.min_value > 0.0);
}

TEST_CASE("ring wave above the minimal speed tends to 1 behind the front") {
    const auto spec = uniform_ring();
    const double c = minimal_speed(spec) + 0.5;
    // front sits near ln(delta)/mu = -37, so R must leave room behind it
    const auto w = solve_wave_profile(spec, c, 100.0, 2001);
    REQUIRE(w.converged);
    CHECK(w.residual <= 1e-8);
    CHECK(w.left_closeness < 1e-3);
    CHECK(w.min_value > 0.0);
    CHECK(w.decay_rate == doctest::Approx((c - std::sqrt(c * c - 4.0)) / 2.0).epsilon(1e-8));
}

TEST_CASE("1 is returned when both ends are pinned at 1") {
    const auto spec = uniform_ring();
    WaveOptions opt;
    opt.right_level = 1.0;
    opt.initial_guess = DenseMatrix(3, 401, 1.0);
    const auto w = solve_wave_profile(spec, 2.5, 40.0, 401, opt);
    REQUIRE(w.converged);
    for (double v : w.values.data()) CHECK(v == 1.0);
    CHECK(w.residual == 0.0);
}

TEST_CASE("no profile below the minimal speed") {
    const auto spec = uniform_ring();
    const auto w = solve_wave_profile(spec, minimal_speed(spec) - 0.5, 60.0, 1201);
    CHECK_FALSE(w.converged);
    CHECK(w.reason == "no-profile");
}

TEST_CASE("energy ledger on 1 is identically zero") {
    WaveProfile w;
    w.grid = SpatialGrid(-10, 10, 81);
    w.speed = 2.0;
    w.d = Vector{1.0, 2.0};
    w.values = DenseMatrix(2, 81, 1.0);
    for (const auto& led : energy_sweep(w)) {
        CHECK(led.lhs == 0.0);
        CHECK(led.rhs == 0.0);
        CHECK(led.slack == 0.0);
    }
    w.values(1, 40) = 0.0;
    CHECK_THROWS_AS(energy_estimate(w, 5.0), PreconditionError);
    CHECK_THROWS_AS(energy_estimate(w, 20.0), PreconditionError);
}

TEST_CASE("energy slack equals the integrated reaction gap") {
    // lhs = rhs - int sum_i [(Mp)_i/p_i + (p_i - 1)(C(p-1))_i], and that integrand is
    // nonnegative under the assumptions, so the slack is the quadrature of it.
    const auto spec = uniform_ring();
    const double c = minimal_speed(spec) + 0.5;
    const auto w = solve_wave_profile(spec, c, 100.0, 2001);
    REQUIRE(w.converged);
    const auto sweep = energy_sweep(w);
    for (std::size_t k = 0; k < sweep.size(); ++k) {
        const auto& led = sweep[k];
        CAPTURE(led.R);
        CHECK(led.slack >= -1e-4);
        if (k > 0) CHECK(led.wake_bracket <= sweep[k - 1].wake_bracket);

        const std::size_t a = w.grid.index_of(-led.R), b = w.grid.index_of(led.R);
        double gap = 0.0;
        for (std::size_t j = a; j <= b; ++j) {
            Vector p(3);
            for (std::size_t i = 0; i < 3; ++i) p[i] = w.values(i, j);
            const auto split = lyapunov_pairing_split(spec, p);
            gap += (j == a || j == b ? 0.5 : 1.0) * (split.competition_side - split.mutation_side);
        }
        gap *= w.grid.dx();
        CHECK(led.slack == doctest::Approx(gap).epsilon(1e-2));
    }
    CHECK(sweep.back().wake_bracket < 1e-6);
}

TEST_CASE("energy ledger on truncated profiles bounded below") {
    const auto spec = two_component_system(0.25, 0.5, 1.0, 4.0);
    const double c = minimal_speed(spec) + 0.5;
    for (double level : {0.5, 0.1, 0.01, 1e-3}) {
        CAPTURE(level);
        WaveOptions opt;
        opt.right_level = level;
        const auto w = solve_wave_profile(spec, c, 60.0, 1201, opt);
        REQUIRE(w.converged);
        REQUIRE(w.min_value >= level * (1 - 1e-12));
        const auto sweep = energy_sweep(w);
        for (std::size_t k = 0; k < sweep.size(); ++k) {
            CHECK(sweep[k].slack >= -1e-4);
            if (k > 0) CHECK(sweep[k].wake_bracket <= sweep[k - 1].wake_bracket);
        }
    }
}

TEST_CASE("the oscillatory wake is not square integrable in log derivative") {
    FrontOptions opt;
    opt.perturbation = 0.01;
    const auto run = front_experiment(hopf_ring(), opt);
    const auto& s = run.final_state;
    const std::size_t a = s.grid.index_of(run.wake.window_lo), b = s.grid.index_of(run.wake.window_hi);
    FieldState wake;
    wake.grid = SpatialGrid(s.grid.x(a), s.grid.x(b), b - a + 1);
    wake.values = DenseMatrix(3, b - a + 1);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = a; j <= b; ++j) wake.values(i, j - a) = s.values(i, j);
    const auto sweep = energy_sweep(profile_from_field(wake, hopf_ring(), run.measured_speed));
    CHECK(sweep.front().lhs > 1.0);
    for (std::size_t k = 1; k < sweep.size(); ++k) CHECK(sweep[k].lhs > sweep[k - 1].lhs);
}

TEST_CASE("csv exports") {
    FieldState s = uniform_state(SpatialGrid(0.0, 1.0, 3), Vector{1.0, 0.5});
    s.t = 0.25;
    std::ostringstream os;
    write_snapshots_csv(os, {s});
    CHECK(os.str() == "t,x,u_1,u_2\n0.25,0,1,0.5\n0.25,0.5,1,0.5\n0.25,1,1,0.5\n");

    WaveProfile w;
    w.grid = SpatialGrid(-1.0, 1.0, 3);
    w.speed = 2.0;
    w.values = DenseMatrix(1, 3, 1.0);
    w.converged = true;
    std::ostringstream ps;
    write_profile_csv(ps, w);
    CHECK(ps.str() == "xi,p_1\n-1,1\n0,1\n1,1\n");
    const auto rec = profile_record(w);
    CHECK(rec.at("c") == "2");
    CHECK(rec.at("R") == "1");
    CHECK(rec.at("residual") == "0");
    CHECK(rec.at("reason") == "ok");
    CHECK(parse_scheme("rk4") == Scheme::rk4);
    CHECK_THROWS_AS(parse_scheme("euler"), MalformedInput);
}
