#include "priorflow/calib.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "priorflow/fem.hpp"
#include "priorflow/parallel.hpp"
#include "priorflow/rng.hpp"

namespace priorflow::calib {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string alpha_text(std::span<const double> alpha) {
  std::string s = "(";
  for (std::size_t i = 0; i < alpha.size(); ++i) s += (i ? ", " : "") + format_double(alpha[i]);
  return s + ")";
}

std::vector<double> exp_of(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i]);
  return out;
}

std::vector<double> log_of(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::log(v[i]);
  return out;
}

nlohmann::ordered_json run_metadata(const CalibrationConfig& config, bool joint) {
  nlohmann::ordered_json m;
  m["gradient"] = "central differences in log alpha with common random numbers";
  m["fd_delta"] = config.loss.fd_delta;
  m["data_rows"] = "all rows when N_s equals N, otherwise resampled with replacement every iteration";
  m["directions"] = "fresh per iteration, shared by the probes of that iteration";
  m["kappa_sorted"] = randfield::is_level_set(config.model.family);
  if (joint) {
    m["operator_warm_start"] = true;
    m["operator_init"] = "uniform +-1/sqrt(fan_in), spectral uniform +-1/(channels*modes)";
    m["inner_probe_rerun"] = "each probe reruns the inner steps from the warm start with identical seeds";
    m["pretrain_steps"] = config.pretrain_steps;
  }
  return m;
}

RunTrace start_trace(const Dataset& data, const CalibrationConfig& config, std::vector<double>& log_alpha) {
  RunTrace trace;
  trace.family = config.model.family;
  trace.master_seed = config.seed;
  trace.initial_alpha = config.init_alpha ? *config.init_alpha : initial_alpha(config.model.family, config.seed);
  if (trace.initial_alpha.size() != randfield::PriorSpec::alpha_size(config.model.family))
    throw std::invalid_argument("calibration: initial alpha has the wrong length");
  if (data.true_prior.family == config.model.family ||
      (randfield::is_level_set(data.true_prior.family) && randfield::is_level_set(config.model.family)))
    trace.true_alpha = data.true_prior.alpha;
  log_alpha = log_of(trace.initial_alpha);
  return trace;
}

void check_finite(const LossValue& v, std::span<const double> alpha) {
  if (!std::isfinite(v.total))
    throw std::runtime_error("calibration: non-finite loss at alpha = " + alpha_text(alpha));
}

}  // namespace

double regularizer_h(std::span<const double> alpha, std::span<const double> m_h, double sigma_h) {
  if (alpha.size() != m_h.size()) throw std::invalid_argument("regularizer_h: alpha and m_h differ in length");
  if (!(sigma_h > 0.0)) throw std::invalid_argument("regularizer_h: sigma_h must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0)) throw std::invalid_argument("regularizer_h: alpha must be positive");
    const double d = std::log(alpha[i]) - m_h[i];
    acc += d * d;
  }
  return acc / (2.0 * sigma_h * sigma_h);
}

double regularizer_h(std::span<const double> alpha, const RegularizerConfig& reg) {
  return reg.enabled ? regularizer_h(alpha, reg.m_h, reg.sigma_h) : 0.0;
}

void LossConfig::validate(std::size_t alpha_size) const {
  if (N_s < 1) throw std::invalid_argument("loss: N_s must be at least 1");
  if (n_dirs < 1) throw std::invalid_argument("loss: n_dirs must be at least 1");
  if (!(fd_delta > 0.0)) throw std::invalid_argument("loss: fd_delta must be positive");
  if (reg.enabled) {
    if (!(reg.sigma_h > 0.0)) throw std::invalid_argument("loss: regularizer sigma_h must be positive");
    if (reg.m_h.size() != alpha_size)
      throw std::invalid_argument("loss: regularizer m_h must have " + std::to_string(alpha_size) + " entries");
  }
}

IterSeeds IterSeeds::derive(std::uint64_t master, std::size_t iteration) {
  const std::uint64_t base = derive_seed(master, Stream::Iteration, iteration);
  return {derive_seed(base, Stream::Latent), derive_seed(base, Stream::Noise), derive_seed(base, Stream::Data),
          derive_seed(base, Stream::Directions), derive_seed(base, Stream::Inner)};
}

LossEvaluator::LossEvaluator(const Dataset& data, randfield::PriorSpec model, LossConfig config)
    : data_(data), model_(std::move(model)), config_(std::move(config)), forcing_(data.mesh, data.f_const) {
  if (model_.dim != data_.mesh.dim) throw std::invalid_argument("calibration: model and dataset dimensions differ");
  if (!(data_.gamma_std > 0.0)) throw std::invalid_argument("calibration: dataset gamma_std must be positive");
  config_.validate(randfield::PriorSpec::alpha_size(model_.family));
}

std::vector<std::size_t> LossEvaluator::data_rows(const IterSeeds& seeds) const {
  std::vector<std::size_t> rows(config_.N_s);
  if (config_.N_s == data_.N) {
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
  }
  Rng rng(seeds.data);
  std::uniform_int_distribution<std::size_t> pick(0, data_.N - 1);
  for (auto& r : rows) r = pick(rng);
  return rows;
}

measure::EmpiricalBatch LossEvaluator::data_batch(const IterSeeds& seeds) const {
  const auto rows = data_rows(seeds);
  measure::EmpiricalBatch batch(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(data_.d_y));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = data_.row(rows[i]);
    for (std::size_t c = 0; c < data_.d_y; ++c) batch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
  }
  return batch;
}

measure::EmpiricalBatch LossEvaluator::simulated_batch(std::span<const double> alpha, const IterSeeds& seeds,
                                                       const nop::OperatorParams* phi) const {
  randfield::PriorSpec spec = model_;
  spec.alpha.assign(alpha.begin(), alpha.end());
  spec.validate();
  const randfield::PriorSampler sampler(spec, data_.mesh);
  std::optional<nop::OperatorGeometry> geo;
  if (phi) geo.emplace(phi->config, phi->mesh);
  const std::size_t m = config_.N_s;
  measure::EmpiricalBatch out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(data_.d_y));
  parallel_for(m, [&](std::size_t i) {
    const NodalField z = sampler.sample(derive_seed(seeds.latent, i));
    NodalField u;
    if (phi) {
      u = nop::fno_forward(z, *phi, *geo);
    } else {
      try {
        u = fem::solve_darcy(z, forcing_, config_.solver);
      } catch (const fem::SolverError& e) {
        throw fem::SolverError(std::string(e.what()) + " (sample " + std::to_string(i) + ", alpha = " +
                                   alpha_text(alpha) + ")",
                               e.iterations(), e.residual_norm());
      }
    }
    auto y = fem::observe(u, data_.obs_nodes);
    fem::add_observation_noise(y, data_.gamma_std, derive_seed(seeds.noise, i));
    for (std::size_t c = 0; c < y.size(); ++c) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = y[c];
  });
  return out;
}

LossValue LossEvaluator::finish(std::span<const double> alpha, const measure::EmpiricalBatch& sim,
                                const IterSeeds& seeds) {
  const std::pair key{seeds.data, seeds.directions};
  if (!cache_key_ || *cache_key_ != key) {
    cached_slices_.reset();
    cached_dirs_ = measure::sample_sphere(static_cast<int>(data_.d_y), config_.n_dirs, seeds.directions);
    cached_slices_.emplace(data_batch(seeds), *cached_dirs_, data_.gamma_std);
    cache_key_ = key;
  }
  const measure::SortedSlices sim_slices(sim, *cached_dirs_, data_.gamma_std);
  LossValue v;
  v.sw_term = 0.5 * static_cast<double>(data_.d_y) * measure::sw2sq(*cached_slices_, sim_slices);
  v.reg_term = regularizer_h(alpha, config_.reg);
  v.total = v.sw_term + v.reg_term;
  return v;
}

LossValue LossEvaluator::J2(std::span<const double> alpha, const IterSeeds& seeds) {
  return finish(alpha, simulated_batch(alpha, seeds), seeds);
}

LossValue LossEvaluator::J3(std::span<const double> alpha, const nop::OperatorParams& phi, const IterSeeds& seeds) {
  if (!(phi.mesh == data_.mesh)) throw std::invalid_argument("J3: operator mesh differs from the dataset mesh");
  return finish(alpha, simulated_batch(alpha, seeds, &phi), seeds);
}

LossValue eval_J2(std::span<const double> alpha, const Dataset& data, const randfield::PriorSpec& model,
                  const LossConfig& config, const IterSeeds& seeds) {
  LossEvaluator ev(data, model, config);
  return ev.J2(alpha, seeds);
}

LossValue eval_J3(std::span<const double> alpha, const nop::OperatorParams& phi, const Dataset& data,
                  const randfield::PriorSpec& model, const LossConfig& config, const IterSeeds& seeds) {
  LossEvaluator ev(data, model, config);
  return ev.J3(alpha, phi, seeds);
}

std::vector<double> fd_grad(const std::function<double(std::span<const double>)>& loss, std::span<const double> x,
                            double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("fd_grad: delta must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + delta;
    const double up = loss(probe);
    if (!std::isfinite(up)) throw std::runtime_error("fd_grad: non-finite loss at probe " + alpha_text(probe));
    probe[i] = x[i] - delta;
    const double dn = loss(probe);
    if (!std::isfinite(dn)) throw std::runtime_error("fd_grad: non-finite loss at probe " + alpha_text(probe));
    probe[i] = x[i];
    g[i] = (up - dn) / (2.0 * delta);
  }
  return g;
}

std::vector<double> initial_alpha(randfield::PriorFamily family, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::Init));
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
  };
  if (randfield::is_level_set(family)) {
    const double lambda = log_uniform(6.0, 10.0);
    const double km = log_uniform(0.5, 4.0);
    const double kp = log_uniform(0.5, 4.0);
    return {lambda, km, kp};
  }
  const double nu = log_uniform(0.75, 3.0);
  const double ell = log_uniform(0.25, 1.0);
  return {nu, ell};
}

RunTrace run_algorithm1(const Dataset& data, const CalibrationConfig& config, const ProgressFn& progress) {
  const auto t0 = Clock::now();
  std::vector<double> log_alpha;
  RunTrace trace = start_trace(data, config, log_alpha);
  trace.metadata = run_metadata(config, false);
  LossEvaluator ev(data, config.model, config.loss);
  optim::OptimState opt(log_alpha, config.schedule, config.adam);
  const std::size_t T = config.schedule.total_steps;
  for (std::size_t t = 0; t < T; ++t) {
    const auto ti = Clock::now();
    const IterSeeds seeds = IterSeeds::derive(config.seed, t);
    const auto alpha = exp_of(opt.iterate);
    const LossValue centre = ev.J2(alpha, seeds);
    check_finite(centre, alpha);
    const double lr = opt.current_lr();
    const auto grad = fd_grad([&](std::span<const double> la) { return ev.J2(exp_of(la), seeds).total; },
                              opt.iterate, config.loss.fd_delta);
    optim::adam_step(opt, grad);
    TraceRecord rec{t, centre.total, centre.sw_term, centre.reg_term, alpha, lr, ms_since(ti), {}};
    if (progress) progress(rec);
    trace.records.push_back(std::move(rec));
  }
  trace.final_alpha = sort_kappa(config.model.family, exp_of(opt.iterate));
  trace.total_ms = ms_since(t0);
  return trace;
}

JointResult run_algorithm2(const Dataset& data, const CalibrationConfig& config, const ProgressFn& progress) {
  const auto t0 = Clock::now();
  std::vector<double> log_alpha;
  RunTrace trace = start_trace(data, config, log_alpha);
  trace.metadata = run_metadata(config, true);
  LossEvaluator ev(data, config.model, config.loss);
  const NodalField forcing(data.mesh, data.f_const);

  auto sampler_for = [&](std::span<const double> alpha) {
    randfield::PriorSpec spec = config.model;
    spec.alpha = exp_of(alpha);
    spec.validate();
    return randfield::PriorSampler(spec, data.mesh);
  };

  nop::OperatorParams phi = nop::OperatorParams::init(config.op, data.mesh, config.seed);
  optim::OptimState phi_opt(phi.flatten(), config.inner.schedule, config.inner.adam);
  if (config.pretrain_steps > 0) {
    nop::InnerLoopConfig pre = config.inner;
    pre.steps = config.pretrain_steps;
    nop::inner_loop(phi, phi_opt, sampler_for(log_alpha), forcing, pre, derive_seed(config.seed, Stream::Operator, 1));
  }

  optim::OptimState opt(log_alpha, config.schedule, config.adam);
  const std::size_t T = config.schedule.total_steps;
  for (std::size_t t = 0; t < T; ++t) {
    const auto ti = Clock::now();
    const IterSeeds seeds = IterSeeds::derive(config.seed, t);
    const auto alpha = exp_of(opt.iterate);

    nop::OperatorParams phi_c = phi;
    optim::OptimState phi_opt_c = phi_opt;
    const auto inner = nop::inner_loop(phi_c, phi_opt_c, sampler_for(opt.iterate), forcing, config.inner, seeds.inner);
    const LossValue centre = ev.J3(alpha, phi_c, seeds);
    check_finite(centre, alpha);

    auto probe = [&](std::span<const double> la) {
      nop::OperatorParams p = phi;
      optim::OptimState o = phi_opt;
      nop::inner_loop(p, o, sampler_for(la), forcing, config.inner, seeds.inner);
      return ev.J3(exp_of(la), p, seeds).total;
    };
    const double lr = opt.current_lr();
    const auto grad = fd_grad(probe, opt.iterate, config.loss.fd_delta);
    optim::adam_step(opt, grad);
    phi = std::move(phi_c);
    phi_opt = std::move(phi_opt_c);

    TraceRecord rec{t, centre.total, centre.sw_term, centre.reg_term, alpha, lr, ms_since(ti), inner.losses};
    if (progress) progress(rec);
    trace.records.push_back(std::move(rec));
  }
  trace.final_alpha = sort_kappa(config.model.family, exp_of(opt.iterate));
  if (config.surrogate_check_draws > 0) {
    randfield::PriorSpec learned = config.model;
    learned.alpha = trace.final_alpha;
    trace.surrogate_error =
        nop::surrogate_relative_error(phi, randfield::PriorSampler(learned, data.mesh), forcing,
                                      config.surrogate_check_draws, derive_seed(config.seed, Stream::Operator, 2));
  }
  trace.total_ms = ms_since(t0);
  return {std::move(trace), std::move(phi)};
}

}  // namespace priorflow::calib
