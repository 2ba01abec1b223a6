#pragma once

// Builders for the matrix families used by the experiments and test suites.

#include <random>

#include "kpp/spectral.hpp"

namespace kpp {

using Rng = std::mt19937_64;

/// Two-component family M = sigma [[-1,1],[1,-1]], C = [[1-g, g],[g, 1-g]],
/// D = diag(d1, d2).
SystemSpec two_component_system(double gamma, double sigma, double d1 = 1.0, double d2 = 1.0);

/// Normal, non-symmetric, non-circulant 4x4 matrix
/// [[a,b,c,d],[b,a,d,c],[d,c,a,b],[c,d,b,a]].
DenseMatrix normal_block_matrix(double a, double b, double c, double d);

/// Line-sum-symmetric 3x3 matrix [[a,2b,0],[b,c,b],[b,0,d]].
DenseMatrix line_sum_symmetric_example(double a, double b, double c, double d);

/// Random matrix satisfying A1 exactly: a periodic Laplacian with random
/// weights plus a nonnegative combination of (P - I) over random permutation
/// matrices P. Generally neither symmetric nor circulant.
DenseMatrix random_mutation_matrix(std::size_t n, Rng& rng);

/// Random nonnegative line-sum-symmetric matrix (sum of weighted permutation
/// matrices), irreducible because a full cycle is always included.
DenseMatrix random_line_sum_symmetric(std::size_t n, Rng& rng);

/// Random nonnegative matrix whose row and column sums differ.
DenseMatrix random_non_line_sum_symmetric(std::size_t n, Rng& rng);

/// Random positive circulant with sum(phi) = 1 and DFT in the right half plane.
Vector random_stable_phi(std::size_t n, Rng& rng);

/// Random symmetric positive semidefinite positive matrix with C1 = 1 (up to
/// rounding), built as a symmetric Sinkhorn scaling of G G^T.
DenseMatrix random_symmetric_competition(std::size_t n, Rng& rng);

/// Random (D, M, C) satisfying A1-A3; C alternates between circulant and
/// symmetric constructions. `unit_diffusion` forces D = I.
SystemSpec random_stable_system(std::size_t n, Rng& rng, bool unit_diffusion = false);

}  // namespace kpp
