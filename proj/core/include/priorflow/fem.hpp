#pragma once

// P1 finite elements for -div(z grad u) = f on [0,1]^d with u = 0 on the
// boundary. Residuals are evaluated node by node with shifted-index stencils;
// no matrix is ever assembled.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "priorflow/mesh.hpp"

namespace priorflow::fem {

/// Raised when CG fails to reach the requested tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::size_t iterations, double residual_norm)
      : std::runtime_error(what), iterations_(iterations), residual_norm_(residual_norm) {}
  std::size_t iterations() const noexcept { return iterations_; }
  double residual_norm() const noexcept { return residual_norm_; }

 private:
  std::size_t iterations_;
  double residual_norm_;
};

struct SolverOptions {
  double tol = 1e-10;          // relative to the load norm
  std::size_t max_iter = 0;    // 0 means 10 x interior node count
  bool jacobi = false;         // diagonal preconditioner
};

/// Weak-form residual -K(z) u + F(f) on interior nodes (row-major).
/// u must vanish on the boundary.
std::vector<double> residual_1d(const NodalField& z, const NodalField& u, const NodalField& f);
std::vector<double> residual_2d(const NodalField& z, const NodalField& u, const NodalField& f);
std::vector<double> residual(const NodalField& z, const NodalField& u, const NodalField& f);

/// Stiffness action K(z) u on interior nodes, boundary values of u taken as given.
void stiffness_action(const NodalField& z, std::span<const double> u_full, std::span<double> out_interior);
/// Tested load F(f) on interior nodes.
std::vector<double> load_vector(const NodalField& f);

/// Transpose of the map u_full -> K(z) u restricted to interior rows:
/// returns a full-grid vector. Used for reverse-mode sweeps through residuals.
void stiffness_transpose_action(const NodalField& z, std::span<const double> r_interior, std::span<double> out_full);

struct SolveReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// CG solve of K(z) u = F(f); boundary values are exactly zero.
NodalField solve_darcy(const NodalField& z, const NodalField& f, const SolverOptions& opts = {},
                       SolveReport* report = nullptr);

/// Nodal values at obs_nodes, in listed order.
std::vector<double> observe(const NodalField& u, std::span<const std::size_t> obs_nodes);

/// observe(solve_darcy(z, f)) + gamma_std * xi with xi ~ N(0, I) drawn from noise_seed.
std::vector<double> simulate_observation(const NodalField& z, const NodalField& f,
                                         std::span<const std::size_t> obs_nodes, double gamma_std,
                                         std::uint64_t noise_seed, const SolverOptions& opts = {});

/// Adds gamma_std * N(0, I) noise from noise_seed in place.
void add_observation_noise(std::span<double> y, double gamma_std, std::uint64_t noise_seed);

}  // namespace priorflow::fem
