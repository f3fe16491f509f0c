#include "priorflow/bayes.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "priorflow/measure.hpp"
#include "priorflow/rng.hpp"

namespace priorflow::bayes {

double gaussian_kl(double m, double s, double m0, double s0) {
  if (!(s > 0.0) || !(s0 > 0.0)) throw std::invalid_argument("gaussian_kl: scales must be positive");
  return std::log(s0 / s) + (s * s + (m - m0) * (m - m0)) / (2.0 * s0 * s0) - 0.5;
}

BayesCheckResult bayes_check(double y, double gamma_std, std::uint64_t seed, const BayesCheckConfig& config) {
  if (config.n_samples < 1) throw std::invalid_argument("bayes_check: n_samples must be at least 1");
  if (!(gamma_std > 0.0)) throw std::invalid_argument("bayes_check: gamma_std must be positive");
  std::vector<double> eps(config.n_samples);
  Rng rng(derive_seed(seed, Stream::Latent));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i + 1 < eps.size(); i += 2) {
    eps[i] = normal(rng);
    eps[i + 1] = -eps[i];
  }
  if (eps.size() % 2 == 1) eps.back() = 0.0;

  const double g2 = gamma_std * gamma_std;
  const auto n = static_cast<double>(eps.size());
  optim::LrSchedule sched = config.schedule;
  sched.total_steps = config.steps;
  optim::OptimState opt({0.0, 0.0}, sched);  // (m, log s)
  for (std::size_t step = 0; step < config.steps; ++step) {
    const double m = opt.iterate[0];
    const double s = std::exp(opt.iterate[1]);
    double dm = 0.0, dls = 0.0;
    for (double e : eps) {
      const double resid = y - (m + s * e);
      dm -= resid;
      dls -= resid * e * s;
    }
    dm = dm / (n * g2) + m;
    dls = dls / (n * g2) + (s * s - 1.0);
    const double grad[2] = {dm, dls};
    optim::adam_step(opt, grad);
  }

  BayesCheckResult res;
  res.m = opt.iterate[0];
  res.s = std::exp(opt.iterate[1]);
  res.m_hat = y / (g2 + 1.0);
  res.s_hat = std::sqrt(g2 / (g2 + 1.0));
  measure::EmpiricalBatch z(static_cast<Eigen::Index>(eps.size()), 1);
  for (std::size_t i = 0; i < eps.size(); ++i) z(static_cast<Eigen::Index>(i), 0) = res.m + res.s * eps[i];
  const double point[1] = {y};
  res.objective = 0.5 * measure::w2sq_dirac(point, z, gamma_std) + gaussian_kl(res.m, res.s, 0.0, 1.0);
  return res;
}

}  // namespace priorflow::bayes
