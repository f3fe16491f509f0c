#include <benchmark/benchmark.h>

#include "priorflow/fem.hpp"
#include "priorflow/measure.hpp"
#include "priorflow/nop.hpp"
#include "priorflow/randfield.hpp"
#include "priorflow/rng.hpp"

using namespace priorflow;

namespace {

randfield::PriorSpec smooth_prior(int dim, int modes) {
  randfield::PriorSpec s;
  s.family = randfield::PriorFamily::LevelSetSmooth;
  s.alpha = {8.0, 1.0, 2.0};
  s.dim = dim;
  s.modes_j = s.modes_k = modes;
  return s;
}

measure::EmpiricalBatch gaussian_batch(int m, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  measure::EmpiricalBatch b(m, d);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) b(i, k) = normal(rng);
  return b;
}

}  // namespace

static void BM_PriorSample(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const Mesh mesh(dim, static_cast<int>(state.range(1)));
  const randfield::PriorSampler sampler(smooth_prior(dim, dim == 1 ? 20 : 12), mesh);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(seed++));
}
BENCHMARK(BM_PriorSample)->Args({1, 65})->Args({2, 32});

static void BM_SolveDarcy(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const Mesh mesh(dim, static_cast<int>(state.range(1)));
  const NodalField z = randfield::push_sample(smooth_prior(dim, 12), 1, mesh);
  const NodalField f(mesh, 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(fem::solve_darcy(z, f));
}
BENCHMARK(BM_SolveDarcy)->Args({1, 65})->Args({2, 32})->Args({2, 64})->Unit(benchmark::kMicrosecond);

static void BM_SlicedWasserstein(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int n_dirs = static_cast<int>(state.range(1));
  const auto x = gaussian_batch(m, 50, 1), y = gaussian_batch(m, 50, 2);
  const auto dirs = measure::sample_sphere(50, n_dirs, 3);
  for (auto _ : state) benchmark::DoNotOptimize(measure::sw2sq(x, y, 0.01, dirs));
}
BENCHMARK(BM_SlicedWasserstein)->Args({64, 1000})->Args({200, 1000})->Unit(benchmark::kMillisecond);

static void BM_OperatorForward(benchmark::State& state) {
  const Mesh mesh(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const nop::OperatorConfig cfg{2, 16, 8};
  const nop::OperatorParams phi = nop::OperatorParams::init(cfg, mesh, 1);
  const nop::OperatorGeometry geo(cfg, mesh);
  const NodalField z = randfield::push_sample(smooth_prior(mesh.dim, 12), 1, mesh);
  for (auto _ : state) benchmark::DoNotOptimize(nop::fno_forward(z, phi, geo));
}
BENCHMARK(BM_OperatorForward)->Args({1, 65})->Args({2, 32})->Unit(benchmark::kMicrosecond);

static void BM_ResidualLossGradient(benchmark::State& state) {
  const Mesh mesh(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const nop::OperatorParams phi = nop::OperatorParams::init({2, 16, 8}, mesh, 1);
  const randfield::PriorSampler sampler(smooth_prior(mesh.dim, 12), mesh);
  std::vector<NodalField> batch;
  for (std::uint64_t s = 0; s < 20; ++s) batch.push_back(sampler.sample(s));
  const NodalField f(mesh, 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(nop::residual_loss_J4(phi, batch, f));
}
BENCHMARK(BM_ResidualLossGradient)->Args({1, 65})->Args({2, 32})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
