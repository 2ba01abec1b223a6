#pragma once

// Constant states of Mu + u = u o (Cu): damped Newton, multistart search and
// the N = 2 bifurcation scan.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kpp/spectral.hpp"

namespace kpp {

struct Equilibrium {
    Vector u;
    double residual = 0.0;  ///< sup-norm of Mu + u - u o (Cu)
    ComplexSpectrum jacobian_spectrum;
    bool stable = false;    ///< every Jacobian eigenvalue has Re < 0
    bool positive = false;  ///< min_i u_i above the boundary cutoff

    double max_real() const { return jacobian_spectrum.max_real(); }
};

/// F(u) = Mu + u - u o (Cu).
Vector equilibrium_residual(const SystemSpec& spec, std::span<const double> u);

/// dF/du = M + I - diag(Cu) - diag(u) C.
DenseMatrix equilibrium_jacobian(const SystemSpec& spec, std::span<const double> u);

/// Fills residual, spectrum, stability and positivity for a given state.
Equilibrium make_equilibrium(const SystemSpec& spec, Vector u);

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    std::string reason;  ///< empty on success, otherwise why Newton gave up
    Equilibrium equilibrium;  ///< last iterate; a root only when converged
};

struct NewtonOptions {
    double tol = 1e-12;
    int max_iter = 100;
    int max_halvings = 40;
    double floor = 1e-12;
};

/// Damped Newton on (Mu)/u + 1 - Cu in log variables, which shares the
/// positive roots of F but not the trivial root 0. Steps are halved until the
/// residual decreases; log u is floored at log(floor). A singular Jacobian is
/// retried with a small diagonal shift. Convergence is judged on sup |F|.
/// Never throws on divergence.
NewtonOutcome newton_equilibrium(const SystemSpec& spec, std::span<const double> u0, const NewtonOptions& opt = {});

struct EquilibriumSet {
    std::vector<Equilibrium> positive;  ///< sorted lexicographically
    std::vector<Equilibrium> boundary;  ///< roots with a component below the cutoff (0, semi-trivial)
    int starts = 0;
    int converged = 0;
};

/// Below this a component counts as zero when classifying roots.
inline constexpr double boundary_cutoff = 1e-6;

/// Multistart Newton from `n_starts` log-uniform samples in [1e-3, 10]^N, plus
/// 1 and the N cyclic shifts of (2, 0.1, ..., 0.1). Roots closer than 1e-6 in
/// sup-norm are merged. The result does not depend on evaluation order.
EquilibriumSet find_all_equilibria(const SystemSpec& spec, int n_starts = 64, std::uint64_t seed = 0,
                                   double tol = 1e-10);

struct BifurcationDiagram {
    std::string parameter_name;
    Vector parameter_samples;
    std::vector<std::vector<Equilibrium>> branches;
    /// Largest real part of the Jacobian at 1 for each sample.
    Vector max_real_at_one;
    /// Parameter values where that largest real part changes sign.
    Vector detected_thresholds;
    /// Midpoints of sample intervals where the positive-equilibrium count changes.
    Vector count_changes;
};

/// Scans sigma over [sigma_lo, sigma_hi] for the two-component family with
/// fixed gamma. Sign changes of the stability exponent at 1 are bracketed by
/// bisection down to `threshold_tol`.
BifurcationDiagram bifurcation_scan_n2(double gamma, double sigma_lo, double sigma_hi, int n_samples,
                                       std::uint64_t seed = 0, int n_starts = 64, double threshold_tol = 1e-10);

/// Rows: n, u_1..u_N, residual, max_re_jacobian, stable. Header written when `header`.
void write_equilibria_csv(std::ostream& os, const std::vector<Equilibrium>& eqs, bool header = true);

}  // namespace kpp
