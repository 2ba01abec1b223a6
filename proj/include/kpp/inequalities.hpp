#pragma once

// Runtime certificates for the three inequalities behind the uniqueness
// argument:
//   Eaves:        sum_ij a_ij u_j / u_i >= sum_ij a_ij   (A >= 0 line-sum-symmetric)
//   mutation:     sum_i (Mu)_i / u_i >= 0                (M satisfies A1)
//   competition:  q^T C q >= min Re sp(C) |q|^2          (C normal)
// plus the Lyapunov functionals built on top of them.

#include <map>
#include <span>
#include <string>

#include "kpp/dense.hpp"
#include "kpp/generators.hpp"
#include "kpp/spectral.hpp"

namespace kpp {

struct InequalityCertificate {
    double lhs = 0.0;
    double rhs = 0.0;
    /// lhs - rhs; the inequality under test reads margin >= 0.
    double margin = 0.0;
    /// The inequality holds up to the operation's tolerance.
    bool satisfied = false;
    bool equality_case_detected = false;
    Vector witness;

    /// Flat key/value form: lhs, rhs, margin, satisfied, equality, witness_1..witness_N.
    std::map<std::string, std::string> record() const;
};

/// lhs = sum_ij a_ij u_j / u_i, rhs = sum_ij a_ij. Equality is reported when
/// margin <= equality_tol * max(1, rhs) and, for irreducible A, additionally
/// max_i |u_i / mean(u) - 1| <= equality_tol. `satisfied` means
/// margin >= -tol * max(1, rhs).
InequalityCertificate eaves_gap(const DenseMatrix& a, std::span<const double> u, double equality_tol = 1e-8,
                                double tol = 1e-12);

/// sum_i (Mu)_i / u_i, evaluated as the Eaves margin of M - min_i(m_ii) I.
double mutation_pairing(const DenseMatrix& m, std::span<const double> u);

/// lhs = q^T C q, rhs = min Re sp(C) * |q|^2 (|Uq| = |q| for unitary U).
/// `satisfied` means lhs >= rhs - tol * |q|^2 (and lhs >= -tol |q|^2 when the
/// spectrum is in the right half plane). Throws PreconditionError when C fails
/// A2 (positive, normal, C1 = 1) at tolerance `a2_tol`.
InequalityCertificate competition_pairing(const DenseMatrix& c, std::span<const double> q, double tol = 1e-10,
                                          double a2_tol = 1e-10);

struct PairingSplit {
    double mutation_side = 0.0;     ///< -sum_i (Mu)_i / u_i
    double competition_side = 0.0;  ///< sum_i (u_i - 1) (C(u - 1))_i
};

/// Both sides of the identity satisfied by constant equilibria. Under A1-A3
/// the first is <= 0 and the second >= 0, so they can only agree at 0.
PairingSplit lyapunov_pairing_split(const SystemSpec& spec, std::span<const double> u);

/// sum_i int (u_i - ln u_i) dx with the trapezoidal rule; `values` is N x n_points.
double parabolic_lyapunov(const DenseMatrix& values, double dx);

/// Searches for u > 0 with negative Eaves margin by gradient descent on
/// log(u) (scale fixed by sum log u = 0), starting from 1 and then from
/// `restarts` random points. Returns the most negative certificate found.
InequalityCertificate find_eaves_witness(const DenseMatrix& a, Rng& rng, int restarts = 50);

/// Returns the real or imaginary part of an eigenvector of the eigenvalue with
/// the smallest real part, whichever gives the smaller quadratic form.
InequalityCertificate find_competition_witness(const DenseMatrix& c);

}  // namespace kpp
