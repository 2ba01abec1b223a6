#pragma once

// Trait-structured nonlocal equation on an interval of traits, discretized on a
// midpoint mesh into an ordinary SystemSpec.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "kpp/frontlab.hpp"
#include "kpp/spectral.hpp"

namespace kpp {

using TraitFunction = std::function<double(double)>;
using TraitKernel = std::function<double(double, double)>;

struct ContinuumSpec {
    std::string name;
    double theta_lo = 0.0, theta_hi = 1.0;
    TraitFunction d;         ///< spatial diffusivity d(y) > 0
    TraitFunction sigma;     ///< trait diffusivity sigma(y) > 0
    TraitKernel m_kernel;    ///< mutation kernel m(y, z) >= 0
    TraitKernel k_kernel;    ///< competition kernel k(y, z) > 0
};

struct TraitMesh {
    std::size_t n_bins = 0;
    Vector nodes;  ///< cell midpoints
    double h = 0.0;

    static TraitMesh uniform(double lo, double hi, std::size_t n_bins);
};

struct DiscretizedSystem {
    TraitMesh mesh;
    SystemSpec spec;
    DenseMatrix m_div;   ///< Neumann finite-volume stencil of d/dy(sigma d/dy)
    DenseMatrix m_jump;  ///< quadrature of the mutation kernel, zero row sums
    AssumptionReport report;
    bool normalized = false;  ///< competition rows were rescaled to sum to 1
};

/// D = diag(d(y_j)), M = m_div + m_jump, C_ij = h k(y_i, y_j). With
/// `normalize_competition` each row of C is divided by its sum; otherwise C is
/// left as is and the report's A2 items say whether C1 = 1. Throws
/// PreconditionError for n_bins < 3 or nonpositive d, sigma, k, negative m,
/// and MalformedInput for non-finite kernel values.
DiscretizedSystem discretize(const ContinuumSpec& cspec, std::size_t n_bins, bool normalize_competition = false,
                             double tol = 1e-10);

/// d(y) = y, sigma = alpha, m = 0, k = 1/(theta_hi - theta_lo). theta_lo must be
/// positive, since d(0) = 0 would make the spatial diffusion degenerate.
ContinuumSpec cane_toads_preset(double theta_lo, double theta_hi, double alpha);

/// Kernel sampled on a rectangular (y, z) grid, bilinear in between and
/// clamped to the table outside it.
class TabulatedKernel {
public:
    TabulatedKernel(Vector ys, Vector zs, DenseMatrix values);
    double operator()(double y, double z) const;

    const Vector& ys() const { return ys_; }
    const Vector& zs() const { return zs_; }

private:
    Vector ys_, zs_;
    DenseMatrix values_;  ///< values_(i, j) = k(ys_[i], zs_[j])
};

/// Reads "y,z,value" rows (a non-numeric first line is taken as a header).
/// Every (y, z) pair of the grid must appear exactly once.
TabulatedKernel read_kernel_csv(std::istream& in);

struct AdjointReport {
    double mismatch = 0.0;         ///< max_i |h sum_j m(y_i, y_j) - h sum_j m(y_j, y_i)|
    bool adjoint_identity = false; ///< mismatch within tolerance
    Check jump_line_sum_symmetric; ///< the same statement read off m_jump
};

/// Compares the row and column integrals of the mutation kernel on the mesh
/// with the line-sum symmetry of the discretized jump operator.
AdjointReport check_adjoint_identity(const ContinuumSpec& cspec, const TraitMesh& mesh, double tol = 1e-10);

/// h^2 sum_ij k(y_i, y_j) q_i q_j, evaluated directly from the kernel.
double k_quadratic_form(const ContinuumSpec& cspec, const TraitMesh& mesh, std::span<const double> q);

struct ContinuumFrontResult {
    DiscretizedSystem system;
    FrontResult front;
};

/// Discretizes and hands the system to front_experiment. Throws
/// PreconditionError if the discretized M or C fails A1 or A2.
ContinuumFrontResult continuum_front_experiment(const ContinuumSpec& cspec, std::size_t n_bins,
                                                const FrontOptions& opt = {}, bool normalize_competition = false);

}  // namespace kpp
