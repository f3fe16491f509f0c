#include "priorflow/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace priorflow::optim {

double LrSchedule::at(std::size_t step) const {
  if (halvings <= 0 || total_steps == 0) return base_lr;
  const auto phases = static_cast<std::size_t>(halvings) + 1;
  const std::size_t phase = std::min(step * phases / total_steps, phases - 1);
  return std::ldexp(base_lr, -static_cast<int>(phase));
}

OptimState::OptimState(std::vector<double> x0, LrSchedule sched, AdamConfig cfg)
    : iterate(std::move(x0)),
      m(iterate.size(), 0.0),
      v(iterate.size(), 0.0),
      v_max(iterate.size(), 0.0),
      schedule(sched),
      adam(cfg) {}

void adam_step(OptimState& s, std::span<const double> grad) {
  if (grad.size() != s.iterate.size()) throw std::invalid_argument("adam_step: gradient size differs from iterate");
  const double lr = s.schedule.at(s.step);
  ++s.step;
  const double b1 = s.adam.beta1, b2 = s.adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    s.m[i] = b1 * s.m[i] + (1.0 - b1) * grad[i];
    s.v[i] = b2 * s.v[i] + (1.0 - b2) * grad[i] * grad[i];
    double v_used = s.v[i];
    if (s.adam.amsgrad) {
      s.v_max[i] = std::max(s.v_max[i], s.v[i]);
      v_used = s.v_max[i];
    }
    const double m_hat = s.m[i] / c1;
    const double v_hat = v_used / c2;
    s.iterate[i] -= lr * m_hat / (std::sqrt(v_hat) + s.adam.eps);
  }
}

}  // namespace priorflow::optim
