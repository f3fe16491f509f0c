#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace priorflow::optim {

/// Step decay: [0, total_steps) split into halvings + 1 equal phases, the
/// rate halved at each phase boundary.
struct LrSchedule {
  double base_lr = 1e-2;
  int halvings = 4;
  std::size_t total_steps = 600;

  double at(std::size_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool amsgrad = false;
};

/// Adam / AMSGrad state for one flat parameter vector.
struct OptimState {
  std::vector<double> iterate;
  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> v_max;
  std::size_t step = 0;
  LrSchedule schedule;
  AdamConfig adam;

  OptimState() = default;
  OptimState(std::vector<double> x0, LrSchedule sched, AdamConfig cfg = {});

  double current_lr() const { return schedule.at(step); }
};

/// One bias-corrected Adam update of state.iterate along -grad.
void adam_step(OptimState& state, std::span<const double> grad);

}  // namespace priorflow::optim
