#pragma once

// Independent reference implementations. Deliberately slow and written without
// the production code paths they are compared against.

#include <span>
#include <vector>

#include "priorflow/mesh.hpp"

namespace priorflow::checks {

/// Minimum over all permutation couplings of the mean squared difference.
double brute_force_w2sq(std::span<const double> xs, std::span<const double> ys);

/// Dense P1 assembly of the stiffness matrix (node_count^2, row-major),
/// element by element from barycentric gradients. In 2D each square is split
/// along the diagonal joining its (j-1,k-1) and (j,k) corners and both
/// triangles carry z at the square's (j-1,k-1) node; in 1D element [i,i+1]
/// carries z_i.
std::vector<double> dense_stiffness(const NodalField& z);

/// Load vector on all nodes: 1-point (centroid) quadrature per triangle in 2D,
/// lumped h f_i in 1D.
std::vector<double> dense_load(const NodalField& f);

/// -K u + F restricted to interior rows, from the dense assembly.
std::vector<double> dense_residual(const NodalField& z, const NodalField& u, const NodalField& f);

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  double max_error = 0.0;
  double ratio = 0.0;  // previous error / this error (0 for the first row)
};

/// z = 1, u* = sin(pi x1) sin(pi x2), f = 2 pi^2 u*, solved on each n; nodal max error.
std::vector<ConvergenceRow> manufactured_convergence_2d(std::span<const int> sizes);

}  // namespace priorflow::checks
