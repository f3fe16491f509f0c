#pragma once

// Sliced-Wasserstein calibration of prior parameters alpha against a dataset,
// either through the FEM solver or jointly with a residual-trained operator.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "priorflow/dataset.hpp"
#include "priorflow/measure.hpp"
#include "priorflow/nop.hpp"
#include "priorflow/optim.hpp"
#include "priorflow/randfield.hpp"
#include "priorflow/trace.hpp"

namespace priorflow::calib {

struct RegularizerConfig {
  bool enabled = false;
  std::vector<double> m_h;
  double sigma_h = 2.0;
};

/// ||log(alpha) - m_h||^2 / (2 sigma_h^2).
double regularizer_h(std::span<const double> alpha, std::span<const double> m_h, double sigma_h);
double regularizer_h(std::span<const double> alpha, const RegularizerConfig& reg);

struct LossConfig {
  std::size_t N_s = 200;
  int n_dirs = 1000;
  double fd_delta = 1e-3;  // central-difference step in log alpha
  RegularizerConfig reg;
  fem::SolverOptions solver;

  void validate(std::size_t alpha_size) const;
};

/// Every random stream one outer iteration consumes. Frozen across the
/// finite-difference probes of that iteration.
struct IterSeeds {
  std::uint64_t latent = 0;
  std::uint64_t noise = 0;
  std::uint64_t data = 0;
  std::uint64_t directions = 0;
  std::uint64_t inner = 0;

  static IterSeeds derive(std::uint64_t master, std::size_t iteration);
  bool operator==(const IterSeeds&) const = default;
};

struct LossValue {
  double total = 0.0;
  double sw_term = 0.0;   // (d_y / 2) * SW^2
  double reg_term = 0.0;
};

/// Evaluates J2 / J3 for one dataset and model family. The data-side
/// projections are cached per (data, directions) seed pair, so FD probes
/// within an iteration only pay for the simulated side.
class LossEvaluator {
 public:
  LossEvaluator(const Dataset& data, randfield::PriorSpec model, LossConfig config);

  LossValue J2(std::span<const double> alpha, const IterSeeds& seeds);
  LossValue J3(std::span<const double> alpha, const nop::OperatorParams& phi, const IterSeeds& seeds);

  /// Rows of the dataset used for these seeds: all rows in order when
  /// N_s == N, otherwise N_s draws with replacement.
  std::vector<std::size_t> data_rows(const IterSeeds& seeds) const;
  measure::EmpiricalBatch data_batch(const IterSeeds& seeds) const;
  measure::EmpiricalBatch simulated_batch(std::span<const double> alpha, const IterSeeds& seeds,
                                          const nop::OperatorParams* phi = nullptr) const;

  const Dataset& data() const noexcept { return data_; }
  const randfield::PriorSpec& model() const noexcept { return model_; }
  const LossConfig& config() const noexcept { return config_; }

 private:
  LossValue finish(std::span<const double> alpha, const measure::EmpiricalBatch& sim, const IterSeeds& seeds);

  const Dataset& data_;
  randfield::PriorSpec model_;
  LossConfig config_;
  NodalField forcing_;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> cache_key_;
  std::optional<measure::DirectionSet> cached_dirs_;
  std::optional<measure::SortedSlices> cached_slices_;
};

LossValue eval_J2(std::span<const double> alpha, const Dataset& data, const randfield::PriorSpec& model,
                  const LossConfig& config, const IterSeeds& seeds);
LossValue eval_J3(std::span<const double> alpha, const nop::OperatorParams& phi, const Dataset& data,
                  const randfield::PriorSpec& model, const LossConfig& config, const IterSeeds& seeds);

/// Central differences of loss at x, step delta per coordinate. The caller's
/// closure must hold its randomness fixed. Throws on a non-finite probe.
std::vector<double> fd_grad(const std::function<double(std::span<const double>)>& loss, std::span<const double> x,
                            double delta);

struct CalibrationConfig {
  randfield::PriorSpec model;  // family, fixed hyperparameters, truncation
  LossConfig loss;
  optim::LrSchedule schedule;  // total_steps is T
  optim::AdamConfig adam;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> init_alpha;  // otherwise drawn log-uniformly

  // Joint runs only.
  nop::OperatorConfig op;
  nop::InnerLoopConfig inner;
  std::size_t pretrain_steps = 0;
  std::size_t surrogate_check_draws = 50;
};

/// Log-uniform initial alpha for a family, from derive_seed(seed, Stream::Init).
std::vector<double> initial_alpha(randfield::PriorFamily family, std::uint64_t seed);

using ProgressFn = std::function<void(const TraceRecord&)>;

RunTrace run_algorithm1(const Dataset& data, const CalibrationConfig& config, const ProgressFn& progress = {});

struct JointResult {
  RunTrace trace;
  nop::OperatorParams phi;
};

JointResult run_algorithm2(const Dataset& data, const CalibrationConfig& config, const ProgressFn& progress = {});

}  // namespace priorflow::calib
