#pragma once

// Numerical property checks shared by the test binaries and `priorflow verify`.

#include <cstdint>
#include <string>
#include <vector>

namespace priorflow::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // the measured quantity the tolerance applies to
  double tolerance = 0.0;
  std::string detail;
};

struct DiracSlicingOptions {
  int trials = 20;
  int dim = 5;
  int batch = 200;
  int n_dirs = 10000;
  double tolerance = 0.05;
  std::uint64_t seed = 1;
};
/// Worst relative gap between sw2sq(repeated y, batch) and w2sq_dirac(y, batch)/d.
CheckResult dirac_slicing(const DiracSlicingOptions& opts = {});

struct ConvolutionShiftOptions {
  int dim = 5;
  int batch = 200;
  int draws = 10000;
  double noise_std = 0.3;
  double gamma_std = 0.5;
  double standard_errors = 3.0;
  std::uint64_t seed = 2;
};
/// Mean shift of w2sq_dirac under added centred Gaussian noise vs d s^2 / gamma^2.
CheckResult convolution_shift(const ConvolutionShiftOptions& opts = {});

/// w2sq_1d vs the permutation oracle for every size up to max_size,
/// over `cases` random pairs per size with ties included. Exact equality required.
CheckResult w2_brute_force(int max_size = 6, int cases = 200, std::uint64_t seed = 3);

/// d = 1 identity: w2sq_1d(x/g, y/g) == w2sq_1d(x, y) / g^2.
CheckResult weighted_pushforward(std::uint64_t seed = 4);

CheckResult fem_analytic_1d();
/// residual_2d vs dense assembly on meshes 3..9 for `trials` random inputs.
CheckResult fem_stencil_vs_dense(int trials = 100, std::uint64_t seed = 5);
CheckResult fem_manufactured_ratio();

/// gradcheck of every tape primitive on random shapes (one result per primitive).
std::vector<CheckResult> tape_primitives(int repeats = 10, std::uint64_t seed = 6);
CheckResult tape_spectral_block(std::uint64_t seed = 7);
CheckResult tape_residual_loss(std::uint64_t seed = 8);

/// Recovery of the conjugate posterior for y = 1, gamma = 1 (two results: mean, std).
std::vector<CheckResult> bayes_recovery(std::uint64_t seed = 9);

/// Everything above, in order.
std::vector<CheckResult> run_all();

}  // namespace priorflow::checks
