#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kpp/generators.hpp"
#include "kpp/inequalities.hpp"

using namespace kpp;

namespace {

Vector random_positive(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> lu(std::log(0.05), std::log(20.0));
    Vector u(n);
    for (auto& x : u) x = std::exp(lu(rng));
    return u;
}

// Reference evaluation straight from the definition.
double pairing_oracle(const DenseMatrix& m, const Vector& u) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) r += m(i, j) * u[j];
        s += r / u[i];
    }
    return s;
}

}  // namespace

TEST_CASE("eaves_gap reference values") {
    const DenseMatrix swap{{0, 1}, {1, 0}};
    auto c = eaves_gap(swap, Vector{2, 1});
    CHECK(c.lhs == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(c.rhs == 2.0);
    CHECK(c.margin == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c.satisfied);
    CHECK_FALSE(c.equality_case_detected);

    const auto lss = line_sum_symmetric_example(1, 2, 3, 4);
    c = eaves_gap(lss, Vector{3, 3, 3});
    CHECK(c.margin == 0.0);
    CHECK(c.equality_case_detected);

    const DenseMatrix skew{{0, 2}, {1, 0}};
    c = eaves_gap(skew, Vector{1, 1 / std::numbers::sqrt2});
    CHECK(c.lhs == doctest::Approx(2 * std::numbers::sqrt2).epsilon(1e-14));
    CHECK(c.rhs == 3.0);
    CHECK(c.margin < 0.0);
    CHECK_FALSE(c.satisfied);

    CHECK_THROWS_AS(eaves_gap(swap, Vector{1, 0}), PreconditionError);
    CHECK_THROWS_AS(eaves_gap(swap, Vector{1, -2}), PreconditionError);
    CHECK_THROWS_AS(eaves_gap(DenseMatrix{{0, -1}, {1, 0}}, Vector{1, 1}), PreconditionError);
}

TEST_CASE("eaves_gap margin is nonnegative for line-sum-symmetric matrices") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + trial % 7;
        const auto a = random_line_sum_symmetric(n, rng);
        const auto u = random_positive(n, rng);
        const auto c = eaves_gap(a, u);
        CHECK(c.margin >= -1e-12);
        CHECK(c.margin == c.lhs - c.rhs);
    }
}

TEST_CASE("eaves equality case is exactly the ray of ones") {
    Rng rng(12);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 5;
        const auto a = random_line_sum_symmetric(n, rng);
        Vector u(n, scale(rng));
        CHECK(eaves_gap(a, u).equality_case_detected);
        // a perturbation of size 1e-5 gives a margin near 1e-10, below the
        // equality tolerance, so only the span test can reject it
        Vector p = u;
        for (auto& x : p) x *= 1.0 + 1e-5 * g(rng);
        CHECK_FALSE(eaves_gap(a, p).equality_case_detected);
        CHECK_FALSE(eaves_gap(a, random_positive(n, rng)).equality_case_detected);
    }
}

TEST_CASE("witness search finds a negative margin off line-sum symmetry") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 4;
        const auto a = random_non_line_sum_symmetric(n, rng);
        const auto w = find_eaves_witness(a, rng);
        CHECK(w.margin < 0.0);
        CHECK(eaves_gap(a, w.witness).margin == w.margin);
    }
    // For line-sum-symmetric input the search cannot go below zero.
    const auto w = find_eaves_witness(line_sum_symmetric_example(1, 2, 3, 4), rng, 5);
    CHECK(w.margin >= -1e-12);
}

TEST_CASE("the skewed 2x2 witness matches the analytic minimum") {
    Rng rng(14);
    const auto w = find_eaves_witness(DenseMatrix{{0, 2}, {1, 0}}, rng, 3);
    CHECK(w.margin == doctest::Approx(2 * std::numbers::sqrt2 - 3).epsilon(1e-9));
    CHECK(w.witness[1] / w.witness[0] == doctest::Approx(1 / std::numbers::sqrt2).epsilon(1e-5));
}

TEST_CASE("mutation_pairing") {
    const DenseMatrix m{{-1, 1}, {1, -1}};
    CHECK(mutation_pairing(m, Vector{1, 1}) == 0.0);
    CHECK(mutation_pairing(m, Vector{2, 1}) == doctest::Approx(0.5).epsilon(1e-15));

    Rng rng(15);
    for (int k = 0; k < 20; ++k) {
        const auto mm = random_mutation_matrix(6, rng);
        CHECK(std::abs(mutation_pairing(mm, ones(6))) <= 1e-12);
        for (int j = 0; j < 20; ++j) {
            const auto u = random_positive(6, rng);
            const double v = mutation_pairing(mm, u);
            CHECK(v >= -1e-12);
            CHECK(v == doctest::Approx(pairing_oracle(mm, u)).epsilon(1e-10).scale(1.0));

            double lo = mm(0, 0);
            for (std::size_t i = 1; i < 6; ++i) lo = std::min(lo, mm(i, i));
            DenseMatrix a = mm;
            for (std::size_t i = 0; i < 6; ++i) a(i, i) -= lo;
            CHECK(std::abs(v - eaves_gap(a, u).margin) <= 1e-12);
        }
    }
}

TEST_CASE("competition_pairing reference values") {
    const DenseMatrix half{{0.5, 0.5}, {0.5, 0.5}};
    auto c = competition_pairing(half, Vector{1, -1});
    CHECK(std::abs(c.lhs) <= 1e-15);
    CHECK(std::abs(c.rhs) <= 1e-12);
    CHECK(c.satisfied);
    c = competition_pairing(half, Vector{1, 0});
    CHECK(c.lhs == doctest::Approx(0.5));
    CHECK(c.satisfied);

    CHECK_THROWS_AS(competition_pairing(DenseMatrix{{0.5, 0.6}, {0.5, 0.5}}, Vector{1, 0}), PreconditionError);
    CHECK_THROWS_AS(competition_pairing(DenseMatrix{{1.0, 0.0}, {0.5, 0.5}}, Vector{1, 0}), PreconditionError);
}

TEST_CASE("competition_pairing on the 4x4 normal block matrix") {
    const auto c4 = normal_block_matrix(0.4, 0.3, 0.2, 0.1);
    Rng rng(16);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        Vector q(4);
        for (auto& x : q) x = g(rng);
        const auto cert = competition_pairing(c4, q);
        CHECK(cert.rhs == doctest::Approx(0.1 * dot(q, q)).epsilon(1e-10));
        CHECK(cert.lhs >= 0.1 * dot(q, q) - 1e-10);
        CHECK(cert.satisfied);
    }
}

TEST_CASE("competition witness exists when A3 fails") {
    // Hopf seed: complex pair with negative real part.
    const auto c = make_circulant(Vector{0.98, 0.01, 0.01});
    const auto w = find_competition_witness(c);
    CHECK(w.lhs < 0.0);
    CHECK_FALSE(w.satisfied);
    CHECK(competition_pairing(c, w.witness).lhs == doctest::Approx(w.lhs));

    // Real negative eigenvalue.
    const auto s = two_component_system(0.8, 0.05);
    const auto w2 = find_competition_witness(s.C());
    CHECK(w2.lhs / dot(w2.witness, w2.witness) == doctest::Approx(-0.6));

    // No witness under A3.
    Rng rng(17);
    for (int k = 0; k < 10; ++k) {
        const auto phi = random_stable_phi(5, rng);
        CHECK(find_competition_witness(make_circulant(phi)).lhs >= -1e-10);
    }
}

TEST_CASE("lyapunov_pairing_split") {
    const auto good = two_component_system(0.25, 0.5);
    auto s = lyapunov_pairing_split(good, Vector{1, 1});
    CHECK(s.mutation_side == 0.0);
    CHECK(s.competition_side == 0.0);

    // Asymmetric equilibrium of the gamma = 0.8, sigma = 0.05 system, frozen
    // from a grid scan refined by Newton.
    const auto bad = two_component_system(0.8, 0.05);
    const Vector eq{4.4150635094610966169, 0.084936490538903383091};
    s = lyapunov_pairing_split(bad, eq);
    CHECK(s.mutation_side == doctest::Approx(s.competition_side).epsilon(1e-8));
    CHECK(s.mutation_side < -0.1);

    Rng rng(18);
    bool differs = false;
    for (int k = 0; k < 5; ++k) {
        s = lyapunov_pairing_split(good, random_positive(2, rng));
        differs = differs || std::abs(s.mutation_side - s.competition_side) > 1e-3;
        CHECK(s.mutation_side <= 1e-12);
        CHECK(s.competition_side >= -1e-12);
    }
    CHECK(differs);
}

TEST_CASE("parabolic_lyapunov quadrature") {
    DenseMatrix ones3(3, 41, 1.0);
    CHECK(parabolic_lyapunov(ones3, 0.25) == doctest::Approx(3 * 10.0).epsilon(1e-14));
    DenseMatrix e2(2, 11, std::numbers::e);
    CHECK(parabolic_lyapunov(e2, 0.1) == doctest::Approx(2 * (std::numbers::e - 1)).epsilon(1e-14));
    DenseMatrix bad(1, 3, 1.0);
    bad(0, 1) = 0.0;
    CHECK_THROWS_AS(parabolic_lyapunov(bad, 1.0), PreconditionError);
}

TEST_CASE("certificate record") {
    const auto c = eaves_gap(DenseMatrix{{0, 1}, {1, 0}}, Vector{2, 1});
    const auto r = c.record();
    CHECK(r.at("lhs") == "2.5");
    CHECK(r.at("margin") == "0.5");
    CHECK(r.at("witness_1") == "2");
    CHECK(r.at("equality") == "0");
}
