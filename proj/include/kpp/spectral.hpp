#pragma once

// Matrix families, spectra and the structural assumptions on (D, M, C).
//
// Conventions used throughout:
//   * M is the mutation matrix, C the competition matrix, D = diag(d).
//   * "A1" bundles: M essentially nonnegative, irreducible, line-sum-symmetric,
//     M1 = 0.  "A2": C positive, normal, C1 = 1.  "A3": sp(C) lies in the
//     closed right half plane.
//   * Circulant matrices are built from phi with first row
//     (phi_N, phi_{N-1}, ..., phi_1), i.e. C_ij = phi_{i-j} with the index
//     taken modulo N in 1..N.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "kpp/dense.hpp"

namespace kpp {

struct ComplexSpectrum {
    /// Sorted by descending real part, then descending imaginary part.
    ComplexVector eigenvalues;
    bool eigvecs_available = false;
    /// Column k belongs to eigenvalues[k]; unit 2-norm.
    std::optional<ComplexMatrix> eigenvectors;

    std::size_t size() const noexcept { return eigenvalues.size(); }
    double max_real() const;
    double min_real() const;
};

/// All eigenvalues of a real dense matrix (balancing, Householder reduction
/// to Hessenberg form, Francis double-shift QR). With `want_vectors` every
/// eigenvalue gets an eigenvector by complex inverse iteration, and each pair
/// is verified against ||Av - lv|| <= residual_tol * ||A||_F * ||v||.
/// Throws ConvergenceError when QR stalls or a residual check fails.
ComplexSpectrum spectrum(const DenseMatrix& a, bool want_vectors = false, double residual_tol = 1e-8);

/// Largest distance between two eigenvalue lists under a greedy
/// nearest-neighbour matching. Infinite when the lengths differ.
double multiset_distance(std::span<const Complex> a, std::span<const Complex> b);

struct PerronPair {
    double value = 0.0;
    /// Positive, normalized so that ||v||_1 = N.
    Vector vector;
    double residual = 0.0;  ///< ||Av - value v||_inf
    std::size_t iterations = 0;
};

/// Perron-Frobenius eigenpair of an essentially nonnegative irreducible
/// matrix by power iteration on A + sI, s = 1 + max|a_ii|. The iteration stops
/// once the Collatz-Wielandt bracket min/max (Bv)_i/v_i is narrower than
/// tol * max(1, ||A||_inf).
PerronPair perron_eigenpair(const DenseMatrix& a, double tol = 1e-12, std::size_t max_iter = 100000);

/// C_ij = phi_{i-j} (periodic index extension). Requires phi > 0.
DenseMatrix make_circulant(std::span<const double> phi);

/// Normalized DFT matrix (1/sqrt(n)) exp(-2 pi i jk / n), 0-based j, k.
ComplexMatrix dft_matrix(std::size_t n);

/// Eigenvalues of make_circulant(phi) from the DFT of phi:
/// lambda_k = sum_m phi_m exp(-2 pi i k m / N), i.e. sqrt(N) * (U_DFT phi~)_k
/// with phi~ = (phi_N, phi_1, ..., phi_{N-1}).
ComplexSpectrum circulant_spectrum_via_dft(std::span<const double> phi);

enum class Boundary { periodic, neumann };

std::string_view to_string(Boundary b);
Boundary parse_boundary(std::string_view s);

/// M = -grad^T diag(sigma) grad with the periodic forward-difference gradient
/// whose first row couples node 1 to node N. The Neumann variant drops that
/// first row, so sigma_1 does not enter. Requires N = sigmas.size() >= 2.
DenseMatrix make_discrete_laplacian(std::span<const double> sigmas, Boundary boundary);

class SystemSpec {
public:
    SystemSpec(Vector d, DenseMatrix m, DenseMatrix c);

    std::size_t n() const noexcept { return d_.size(); }
    const Vector& d() const noexcept { return d_; }
    DenseMatrix D() const { return DenseMatrix::diagonal(d_); }
    const DenseMatrix& M() const noexcept { return m_; }
    const DenseMatrix& C() const noexcept { return c_; }

private:
    Vector d_;
    DenseMatrix m_;
    DenseMatrix c_;
};

enum class Verdict { holds, holds_within_tolerance, fails };

std::string_view to_string(Verdict v);

struct Check {
    Verdict verdict = Verdict::fails;
    /// The number the verdict was read from (mismatch, residual, min entry...).
    double evidence = 0.0;

    bool ok() const noexcept { return verdict != Verdict::fails; }
};

struct AssumptionReport {
    Check a1_essentially_nonnegative;  // evidence: max(0, -min off-diagonal)
    Check a1_irreducible;              // evidence: nodes outside the strong component of node 1
    Check a1_line_sum_symmetric;       // evidence: max_i |row_i - col_i|
    Check a1_pf_eigenpair;             // evidence: ||M1||_inf
    Check a2_positive;                 // evidence: min_ij c_ij
    Check a2_normal;                   // evidence: ||CC^T - C^TC||_F / ||C||_F^2
    Check a2_pf_one;                   // evidence: ||C1 - 1||_inf
    Check a3_right_half_plane;         // evidence: min Re sp(C)

    bool a1() const;
    bool a2() const;
    bool a3() const;
    bool all() const { return a1() && a2() && a3(); }
    /// True when every item is `holds` (no tolerance used).
    bool all_exact() const;
};

// Individual checks, usable on any square matrix.
Check check_essentially_nonnegative(const DenseMatrix& a, double tol);
Check check_irreducible(const DenseMatrix& a);
Check check_line_sum_symmetric(const DenseMatrix& a, double tol);
Check check_zero_row_sums(const DenseMatrix& a, double tol);
Check check_positive(const DenseMatrix& a);
Check check_normal(const DenseMatrix& a, double tol);
Check check_unit_row_sums(const DenseMatrix& a, double tol);
Check check_right_half_plane(const DenseMatrix& a, double tol);

bool is_irreducible(const DenseMatrix& a);

/// Runs every A1-A3 item independently. Throws MalformedInput on non-finite
/// entries.
AssumptionReport check_assumptions(const SystemSpec& spec, double tol = 1e-10);

}  // namespace kpp
