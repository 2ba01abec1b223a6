#include "kpp/generators.hpp"

#include <algorithm>
#include <numeric>

namespace kpp {

SystemSpec two_component_system(double gamma, double sigma, double d1, double d2) {
    DenseMatrix m{{-sigma, sigma}, {sigma, -sigma}};
    DenseMatrix c{{1.0 - gamma, gamma}, {gamma, 1.0 - gamma}};
    return SystemSpec({d1, d2}, std::move(m), std::move(c));
}

DenseMatrix normal_block_matrix(double a, double b, double c, double d) {
    return DenseMatrix{{a, b, c, d}, {b, a, d, c}, {d, c, a, b}, {c, d, b, a}};
}

DenseMatrix line_sum_symmetric_example(double a, double b, double c, double d) {
    return DenseMatrix{{a, 2 * b, 0}, {b, c, b}, {b, 0, d}};
}

namespace {

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

// Adds w * P where P maps i -> perm[i].
void add_permutation(DenseMatrix& a, const std::vector<std::size_t>& perm, double w) {
    for (std::size_t i = 0; i < perm.size(); ++i) a(i, perm[i]) += w;
}

std::vector<std::size_t> random_full_cycle(std::size_t n, Rng& rng) {
    const auto order = random_permutation(n, rng);
    std::vector<std::size_t> perm(n);
    for (std::size_t k = 0; k < n; ++k) perm[order[k]] = order[(k + 1) % n];
    return perm;
}

}  // namespace

DenseMatrix random_mutation_matrix(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> w(0.05, 1.0);
    if (n == 1) return DenseMatrix(1, 1);
    Vector sig(n);
    for (auto& s : sig) s = w(rng);
    DenseMatrix m = make_discrete_laplacian(sig, Boundary::periodic);
    std::uniform_int_distribution<int> extra(0, 2);
    const int k = extra(rng);
    for (int i = 0; i < k; ++i) add_permutation(m, random_permutation(n, rng), w(rng));
    zero_row_sums(m);
    return m;
}

DenseMatrix random_line_sum_symmetric(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> w(0.1, 2.0);
    DenseMatrix a(n, n);
    add_permutation(a, random_full_cycle(n, rng), w(rng));
    std::uniform_int_distribution<int> extra(0, 3);
    const int k = extra(rng);
    for (int i = 0; i < k; ++i) add_permutation(a, random_permutation(n, rng), w(rng));
    return a;
}

DenseMatrix random_non_line_sum_symmetric(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (;;) {
        DenseMatrix a(n, n);
        for (auto& x : a.data()) x = w(rng);
        // sparsify a little so that some instances are far from symmetric
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (w(rng) < 0.3) a(i, j) = 0.0;
        if (check_line_sum_symmetric(a, 1e-3).verdict == Verdict::fails) return a;
    }
}

Vector random_stable_phi(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (;;) {
        Vector phi(n);
        // Weight on "stay" (phi_N sits on the diagonal) pushes the spectrum right.
        const double diag = 0.3 + 0.6 * w(rng);
        double rest = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            phi[i] = 0.02 + w(rng);
            rest += phi[i];
        }
        if (n == 1) {
            phi[0] = 1.0;
            return phi;
        }
        for (std::size_t i = 0; i + 1 < n; ++i) phi[i] *= (1.0 - diag) / rest;
        phi[n - 1] = diag;
        if (circulant_spectrum_via_dft(phi).min_real() >= 0.0) return phi;
    }
}

DenseMatrix random_symmetric_competition(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> w(0.05, 1.0);
    DenseMatrix g(n, n);
    for (auto& x : g.data()) x = w(rng);
    DenseMatrix b = g * g.transpose();
    Vector x(n, 1.0);
    for (int it = 0; it < 10000; ++it) {
        const Vector bx = b * x;
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err = std::max(err, std::abs(x[i] * bx[i] - 1.0));
            x[i] = std::sqrt(x[i] / bx[i]);
        }
        if (err < 1e-15) break;
    }
    DenseMatrix c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) c(i, j) = c(j, i) = x[i] * b(i, j) * x[j];
    return c;
}

SystemSpec random_stable_system(std::size_t n, Rng& rng, bool unit_diffusion) {
    std::uniform_real_distribution<double> dd(0.5, 2.0);
    Vector d(n, 1.0);
    if (!unit_diffusion)
        for (auto& x : d) x = dd(rng);
    DenseMatrix m = random_mutation_matrix(n, rng);
    std::bernoulli_distribution circulant(0.5);
    DenseMatrix c = circulant(rng) ? make_circulant(random_stable_phi(n, rng)) : random_symmetric_competition(n, rng);
    return SystemSpec(std::move(d), std::move(m), std::move(c));
}

}  // namespace kpp
