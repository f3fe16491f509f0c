#include "priorflow/checks/suites.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>

#include "priorflow/bayes.hpp"
#include "priorflow/checks/oracles.hpp"
#include "priorflow/fem.hpp"
#include "priorflow/measure.hpp"
#include "priorflow/nop.hpp"
#include "priorflow/rng.hpp"
#include "priorflow/tape.hpp"

namespace priorflow::checks {
namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

CheckResult upper_bound(std::string name, double value, double tol, std::string detail = {}) {
  return {std::move(name), value < tol, value, tol, std::move(detail)};
}

measure::EmpiricalBatch random_batch(Rng& rng, int m, int d, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  measure::EmpiricalBatch b(m, d);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < d; ++c) b(i, c) = normal(rng);
  return b;
}

tape::Tensor random_tensor(Rng& rng, tape::Shape shape, double scale = 1.0) {
  tape::Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : t.data) v = normal(rng);
  return t;
}

// Sum of squares keeps gradients O(1) so relative FD errors stay meaningful.
tape::Var sum_sq(tape::Var v) { return tape::scale(tape::mean_of_squares(v), static_cast<double>(v.value().size())); }

}  // namespace

CheckResult dirac_slicing(const DiracSlicingOptions& o) {
  Rng rng(o.seed);
  double worst = 0.0;
  for (int t = 0; t < o.trials; ++t) {
    const measure::EmpiricalBatch batch = random_batch(rng, o.batch, o.dim, 1.0);
    const measure::EmpiricalBatch yb = random_batch(rng, 1, o.dim, 1.0);
    const measure::EmpiricalBatch repeated = yb.replicate(o.batch, 1);
    const double gamma = 0.5;
    const std::vector<double> y(yb.data(), yb.data() + o.dim);
    const double target = measure::w2sq_dirac(y, batch, gamma) / o.dim;
    const double sw = measure::sw2sq(repeated, batch, gamma, o.n_dirs, derive_seed(o.seed, Stream::Directions, t));
    worst = std::max(worst, std::abs(sw - target) / target);
  }
  return upper_bound("dirac_slicing", worst, o.tolerance,
                     fmt("worst relative gap %.4g over %g trials", worst, o.trials));
}

CheckResult convolution_shift(const ConvolutionShiftOptions& o) {
  Rng rng(o.seed);
  const measure::EmpiricalBatch batch = random_batch(rng, o.batch, o.dim, 1.0);
  const measure::EmpiricalBatch yb = random_batch(rng, 1, o.dim, 1.0);
  const std::vector<double> y(yb.data(), yb.data() + o.dim);
  const double base = measure::w2sq_dirac(y, batch, o.gamma_std);
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < o.draws; ++k) {
    const measure::EmpiricalBatch noisy = batch + random_batch(rng, o.batch, o.dim, o.noise_std);
    const double d = measure::w2sq_dirac(y, noisy, o.gamma_std) - base;
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / o.draws;
  const double var = (sum2 - o.draws * mean * mean) / (o.draws - 1);
  const double se = std::sqrt(var / o.draws);
  const double expected = o.dim * o.noise_std * o.noise_std / (o.gamma_std * o.gamma_std);
  const double z = std::abs(mean - expected) / se;
  return upper_bound("convolution_shift", z, o.standard_errors,
                     fmt("mean shift %.6g vs expected %.6g", mean, expected));
}

CheckResult w2_brute_force(int max_size, int cases, std::uint64_t seed) {
  // Exhaustive part: every multiset xs and every sequence ys over a small
  // integer alphabet. All arithmetic is exact there, so equality is bitwise.
  const double alphabet[] = {-1.0, 0.0, 2.0};
  long mismatches = 0, compared = 0;
  for (int m = 1; m <= max_size; ++m) {
    std::vector<int> xi(m, 0), yi(m, 0);
    std::vector<double> xs(m), ys(m);
    for (;;) {
      for (int i = 0; i < m; ++i) xs[i] = alphabet[xi[i]];
      std::fill(yi.begin(), yi.end(), 0);
      for (;;) {
        for (int i = 0; i < m; ++i) ys[i] = alphabet[yi[i]];
        if (measure::w2sq_1d(xs, ys) != brute_force_w2sq(xs, ys)) ++mismatches;
        ++compared;
        int i = 0;
        while (i < m && ++yi[i] == 3) yi[i++] = 0;
        if (i == m) break;
      }
      // Next nondecreasing index sequence.
      int i = m - 1;
      while (i >= 0 && xi[i] == 2) --i;
      if (i < 0) break;
      ++xi[i];
      for (int k = i + 1; k < m; ++k) xi[k] = xi[i];
    }
  }
  // Random continuous samples: both sides sum the same squared gaps in
  // different orders, so a few ulps are allowed.
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int m = 1; m <= max_size; ++m)
    for (int c = 0; c < cases; ++c) {
      std::vector<double> xs(m), ys(m);
      for (int i = 0; i < m; ++i) {
        xs[i] = normal(rng);
        ys[i] = normal(rng);
      }
      const double b = brute_force_w2sq(xs, ys);
      worst = std::max(worst, std::abs(measure::w2sq_1d(xs, ys) - b) / std::max(1.0, b));
    }
  CheckResult r{"w2_brute_force", mismatches == 0 && worst < 1e-14, static_cast<double>(mismatches), 0.0,
                std::to_string(compared) + " exhaustive pairs, " + std::to_string(mismatches) +
                    " mismatches; continuous worst gap " + fmt("%.3g", worst)};
  return r;
}

CheckResult weighted_pushforward(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double g = 0.25 * (t % 4 + 1);  // exact in binary
    std::vector<double> xs(37), ys(37), xg(37), yg(37);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xs[i] = normal(rng);
      ys[i] = normal(rng);
      xg[i] = xs[i] / g;
      yg[i] = ys[i] / g;
    }
    const double lhs = measure::w2sq_1d(xg, yg);
    const double rhs = measure::w2sq_1d(xs, ys) / (g * g);
    worst = std::max(worst, std::abs(lhs - rhs) / rhs);
  }
  return upper_bound("weighted_pushforward", worst, 1e-13);
}

CheckResult fem_analytic_1d() {
  const Mesh mesh(1, 257);
  const NodalField u = fem::solve_darcy(NodalField(mesh, 1.0), NodalField(mesh, 10.0));
  const double err = std::abs(u[128] - 1.25);
  return upper_bound("fem_analytic_1d", err, 1e-8, fmt("u(0.5) = %.15g", u[128]));
}

CheckResult fem_stencil_vs_dense(int trials, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> pos(0.1, 5.0), any(-2.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Mesh mesh(2, 3 + t % 7);
    NodalField z(mesh), u(mesh), f(mesh);
    for (std::size_t p = 0; p < mesh.node_count(); ++p) {
      z[p] = pos(rng);
      f[p] = any(rng);
      u[p] = mesh.is_boundary(p) ? 0.0 : any(rng);
    }
    const auto a = fem::residual_2d(z, u, f);
    const auto b = dense_residual(z, u, f);
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return upper_bound("fem_stencil_vs_dense", worst, 1e-12, fmt("max abs gap %.3g", worst));
}

CheckResult fem_manufactured_ratio() {
  const int sizes[] = {17, 33};
  const auto rows = manufactured_convergence_2d(sizes);
  const double ratio = rows[1].ratio;
  return {"fem_manufactured_ratio", ratio >= 3.0 && ratio <= 5.0, ratio, 0.0,
          fmt("error %.4g at h=1/16, ratio %.4g at h=1/32", rows[0].max_error, ratio)};
}

std::vector<CheckResult> tape_primitives(int repeats, std::uint64_t seed) {
  using namespace tape;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  const double delta = 1e-4, tol = 1e-5;
  std::vector<CheckResult> out;
  auto run = [&](const char* name, auto make) {
    double worst = 0.0;
    for (int r = 0; r < repeats; ++r) {
      auto [build, params] = make();
      worst = std::max(worst, gradcheck(build, params, delta));
    }
    out.push_back(upper_bound(std::string("gradcheck_") + name, worst, tol));
  };
  run("add", [&] {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(add(p[0], p[1])); }),
                     std::vector{random_tensor(rng, s), random_tensor(rng, s)}};
  });
  run("sub", [&] {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(sub(p[0], p[1])); }),
                     std::vector{random_tensor(rng, s), random_tensor(rng, s)}};
  });
  run("hadamard", [&] {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(hadamard(p[0], p[1])); }),
                     std::vector{random_tensor(rng, s), random_tensor(rng, s)}};
  });
  run("scale", [&] {
    const Shape s{dim(rng)};
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(scale(p[0], -1.7)); }),
                     std::vector{random_tensor(rng, s)}};
  });
  run("silu", [&] {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(silu(p[0])); }),
                     std::vector{random_tensor(rng, s, 2.0)}};
  });
  run("add_channel_bias", [&] {
    const std::size_t C = dim(rng), G = dim(rng);
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(add_channel_bias(p[0], p[1])); }),
                     std::vector{random_tensor(rng, {C, G}), random_tensor(rng, {C})}};
  });
  run("channel_contract", [&] {
    const std::size_t Co = dim(rng), Ci = dim(rng), G = dim(rng);
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(channel_contract(p[0], p[1])); }),
                     std::vector{random_tensor(rng, {Co, Ci}), random_tensor(rng, {Ci, G})}};
  });
  run("mask_multiply", [&] {
    const std::size_t C = dim(rng), G = dim(rng);
    auto mask = std::make_shared<std::vector<double>>(random_tensor(rng, {G}).data);
    return std::pair{
        GraphBuilder([mask](Tape&, std::span<const Var> p) { return sum_sq(mask_multiply(p[0], mask)); }),
        std::vector{random_tensor(rng, {C, G})}};
  });
  run("mean_of_squares", [&] {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return mean_of_squares(p[0]); }),
                     std::vector{random_tensor(rng, s)}};
  });
  run("spectral_forward", [&] {
    const std::size_t C = dim(rng), n1 = dim(rng) + 2, n2 = dim(rng) + 2, M = dim(rng);
    auto plan = std::make_shared<const SpectralPlan>(n1, n2, M);
    return std::pair{
        GraphBuilder([plan](Tape&, std::span<const Var> p) { return sum_sq(spectral_forward(p[0], plan)); }),
        std::vector{random_tensor(rng, {C, n1 * n2})}};
  });
  run("spectral_inverse", [&] {
    const std::size_t C = dim(rng), n1 = dim(rng) + 2, n2 = dim(rng) + 2, M = dim(rng);
    auto plan = std::make_shared<const SpectralPlan>(n1, n2, M);
    return std::pair{
        GraphBuilder([plan](Tape&, std::span<const Var> p) { return sum_sq(spectral_inverse(p[0], plan)); }),
        std::vector{random_tensor(rng, {C, plan->rows(), plan->cols(), 2})}};
  });
  run("mode_multiply", [&] {
    const std::size_t Co = dim(rng), Ci = dim(rng), R = dim(rng), K = dim(rng);
    return std::pair{GraphBuilder([](Tape&, std::span<const Var> p) { return sum_sq(mode_multiply(p[0], p[1])); }),
                     std::vector{random_tensor(rng, {Co, Ci, R, K, 2}), random_tensor(rng, {Ci, R, K, 2})}};
  });
  return out;
}

CheckResult tape_spectral_block(std::uint64_t seed) {
  using namespace tape;
  Rng rng(seed);
  const std::size_t C = 3, n1 = 6, n2 = 7;
  auto plan = std::make_shared<const SpectralPlan>(n1, n2, 3);
  auto mask = std::make_shared<std::vector<double>>(n1 * n2);
  for (std::size_t p = 0; p < mask->size(); ++p) (*mask)[p] = std::sin(0.3 * static_cast<double>(p) + 0.1);
  const GraphBuilder build = [plan, mask](Tape&, std::span<const Var> p) {
    const Var local = add_channel_bias(channel_contract(p[1], p[0]), p[2]);
    const Var global = spectral_inverse(mode_multiply(p[3], spectral_forward(p[0], plan)), plan);
    return sum_sq(mask_multiply(silu(add(local, global)), mask));
  };
  const std::vector<Tensor> params{random_tensor(rng, {C, n1 * n2}), random_tensor(rng, {C, C}),
                                   random_tensor(rng, {C}), random_tensor(rng, {C, C, plan->rows(), plan->cols(), 2})};
  return upper_bound("gradcheck_spectral_block", gradcheck(build, params, 1e-4), 1e-5);
}

CheckResult tape_residual_loss(std::uint64_t seed) {
  const Mesh mesh(1, 17);
  const nop::OperatorConfig cfg{2, 4, 4};
  const nop::OperatorParams phi = nop::OperatorParams::init(cfg, mesh, seed);
  const nop::OperatorGeometry geo(cfg, mesh);
  NodalField z(mesh);
  for (std::size_t p = 0; p < z.size(); ++p) z[p] = 1.5 + std::cos(3.0 * mesh.coords(p)[0]);
  const NodalField f(mesh, 10.0);
  const tape::GraphBuilder build = [&](tape::Tape& t, std::span<const tape::Var> p) {
    return nop::build_residual_loss(t, p, geo, z, f);
  };
  return upper_bound("gradcheck_residual_loss", tape::gradcheck(build, phi.tensors, 1e-4), 1e-4);
}

std::vector<CheckResult> bayes_recovery(std::uint64_t seed) {
  const auto r = bayes::bayes_check(1.0, 1.0, seed);
  const double em = std::abs(r.m - r.m_hat) / r.m_hat;
  const double es = std::abs(r.s - r.s_hat) / r.s_hat;
  return {upper_bound("bayes_mean", em, 0.02, fmt("m* = %.6g (analytic %.6g)", r.m, r.m_hat)),
          upper_bound("bayes_std", es, 0.05, fmt("s* = %.6g (analytic %.6g)", r.s, r.s_hat))};
}

std::vector<CheckResult> run_all() {
  std::vector<CheckResult> all{dirac_slicing(),        convolution_shift(),    w2_brute_force(),
                               weighted_pushforward(), fem_analytic_1d(),      fem_stencil_vs_dense(),
                               fem_manufactured_ratio()};
  for (auto& r : tape_primitives()) all.push_back(std::move(r));
  all.push_back(tape_spectral_block());
  all.push_back(tape_residual_loss());
  for (auto& r : bayes_recovery()) all.push_back(std::move(r));
  return all;
}

}  // namespace priorflow::checks
