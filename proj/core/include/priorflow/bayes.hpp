#pragma once

// Single-observation check: with identity forward map, a Gaussian prior N(0,1)
// and an affine pushforward m + s * eps, minimizing half the weighted Dirac
// Wasserstein term plus KL to the prior recovers the conjugate posterior.

#include <cstdint>

#include "priorflow/optim.hpp"

namespace priorflow::bayes {

/// KL(N(m, s^2) || N(m0, s0^2)).
double gaussian_kl(double m, double s, double m0, double s0);

struct BayesCheckConfig {
  std::size_t n_samples = 4096;  // drawn as antithetic pairs
  std::size_t steps = 2000;
  optim::LrSchedule schedule{5e-2, 4, 2000};
};

struct BayesCheckResult {
  double m = 0.0;        // recovered
  double s = 0.0;
  double m_hat = 0.0;    // analytic posterior
  double s_hat = 0.0;
  double objective = 0.0;
};

BayesCheckResult bayes_check(double y, double gamma_std, std::uint64_t seed, const BayesCheckConfig& config = {});

}  // namespace priorflow::bayes
