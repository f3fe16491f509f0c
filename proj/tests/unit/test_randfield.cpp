#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "priorflow/randfield.hpp"
#include "priorflow/rng.hpp"

using namespace priorflow;
using namespace priorflow::randfield;

namespace {

constexpr double pi = std::numbers::pi;

PriorSpec levelset_1d(PriorFamily family = PriorFamily::LevelSetSmooth) {
  PriorSpec s;
  s.family = family;
  s.alpha = {8.0, 1.0, 2.0};
  s.dim = 1;
  s.modes_j = 20;
  return s;
}

PriorSpec lognormal_2d(double sigma = 1.0) {
  PriorSpec s;
  s.family = PriorFamily::Lognormal;
  s.alpha = {1.5, 0.5};
  s.sigma = sigma;
  s.dim = 2;
  s.modes_j = 6;
  s.modes_k = 6;
  return s;
}

LatentDraw unit_first_mode(const PriorSpec& spec) {
  LatentDraw d;
  d.eps.assign(spec.mode_count(), 0.0);
  d.eps[0] = 1.0;
  return d;
}

}  // namespace

TEST(Seeds, StreamsAndIndicesDiffer) {
  EXPECT_NE(derive_seed(1, Stream::Latent, 0), derive_seed(1, Stream::Noise, 0));
  EXPECT_NE(derive_seed(1, Stream::Latent, 0), derive_seed(1, Stream::Latent, 1));
  EXPECT_NE(derive_seed(1, Stream::Latent, 0), derive_seed(2, Stream::Latent, 0));
  EXPECT_EQ(derive_seed(7, Stream::Data, 3), derive_seed(7, Stream::Data, 3));
}

TEST(Spectrum, LevelSetExamples) {
  EXPECT_DOUBLE_EQ(levelset_stddev(1, std::nullopt, 0.0, 0.0), 1.0);
  EXPECT_NEAR(levelset_stddev(1, std::nullopt, 8.0, 4.0), 1.8325e-4, 1e-4 * 1.8325e-4);
  EXPECT_NEAR(levelset_stddev(1, 1, 5.0, 4.0), 4.996e-4, 1e-4 * 4.996e-4);
}

TEST(Spectrum, MaternExamples) {
  EXPECT_NEAR(matern_gamma(1.0, 1.5, 2), 6.0 * pi, 1e-12);
  EXPECT_NEAR(matern_stddev(1, 1, 1.0, 0.5, 1.5, 2), 0.2343, 1e-4);
  for (int j = 1; j <= 4; ++j) EXPECT_EQ(matern_stddev(j, j, 0.0, 0.5, 1.5, 2), 0.0);
}

TEST(Spectrum, LevelSetMonotone) {
  for (int j = 1; j < 30; ++j) {
    EXPECT_GT(levelset_stddev(j, std::nullopt, 8.0, 4.0), levelset_stddev(j + 1, std::nullopt, 8.0, 4.0));
    EXPECT_GT(levelset_stddev(j, 2, 3.0, 4.0), levelset_stddev(j, 2, 3.5, 4.0));
  }
}

TEST(Spectrum, ModeIndicesStartAtOne) {
  EXPECT_THROW(levelset_stddev(0, std::nullopt, 8.0, 4.0), std::invalid_argument);
}

TEST(PriorSpec, Validation) {
  PriorSpec s = levelset_1d();
  EXPECT_NO_THROW(s.validate());
  s.beta = 0.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = levelset_1d();
  s.alpha[1] = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = levelset_1d();
  s.alpha.pop_back();
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Latent, DeterministicAndDistinct) {
  const PriorSpec s = levelset_1d();
  EXPECT_EQ(sample_latent(11, s).eps, sample_latent(11, s).eps);
  EXPECT_NE(sample_latent(11, s).eps, sample_latent(12, s).eps);
}

TEST(Latent, PooledMoments) {
  const PriorSpec s = levelset_1d();
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::uint64_t i = 0; i < 5000; ++i)
    for (double e : sample_latent(derive_seed(3, Stream::Latent, i), s).eps) {
      sum += e;
      sq += e * e;
      ++count;
    }
  ASSERT_EQ(count, 100000u);
  const double mean = sum / count;
  EXPECT_LT(std::abs(mean), 0.01);
  EXPECT_LT(std::abs(sq / count - mean * mean - 1.0), 0.02);
}

TEST(Synthesis, FirstModeOnly1D) {
  const PriorSpec s = levelset_1d();
  const Mesh mesh(1, 65);
  const NodalField a = synthesize_grf(unit_first_mode(s), s, mesh);
  const double std1 = levelset_stddev(1, std::nullopt, 8.0, 4.0);
  EXPECT_NEAR(a[0], std1, 1e-18);
  EXPECT_NEAR(a[32], 0.0, 1e-18);
}

TEST(Synthesis, FirstModeOnly2D) {
  const PriorSpec s = lognormal_2d();
  const Mesh mesh(2, 9);
  const NodalField a = synthesize_grf(unit_first_mode(s), s, mesh);
  EXPECT_NEAR(a[0], matern_stddev(1, 1, 1.0, 0.5, 1.5, 2), 1e-15);
}

TEST(Synthesis, ShapeMismatchRejected) {
  const PriorSpec s = levelset_1d();
  LatentDraw d;
  d.eps.assign(3, 1.0);
  EXPECT_THROW(synthesize_grf(d, s, Mesh(1, 9)), std::invalid_argument);
  EXPECT_THROW(synthesize_grf(sample_latent(1, s), s, Mesh(2, 9)), std::invalid_argument);
}

TEST(L2Norm, Examples) {
  EXPECT_NEAR(l2_norm(NodalField(Mesh(1, 17), 1.0)), 1.0, 1e-14);
  EXPECT_NEAR(l2_norm(NodalField(Mesh(2, 17), 1.0)), 1.0, 1e-14);
  const Mesh mesh(1, 256);
  NodalField c(mesh);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::cos(pi * mesh.coords(i)[0]);
  EXPECT_NEAR(l2_norm(c), std::sqrt(0.5), 1e-3);
}

TEST(LevelSet, SharpExamples) {
  const Mesh mesh(1, 9);
  const NodalField neg(mesh, -1.0);
  for (double v : levelset_sharp(neg, 1.0, 2.0).values) EXPECT_EQ(v, 1.0);
  for (double v : levelset_sharp(NodalField(mesh, 0.0), 1.0, 2.0).values) EXPECT_EQ(v, 2.0);
  NodalField step(mesh, -1.0);
  step[4] = 0.5;
  const NodalField z = levelset_sharp(step, 1.0, 2.0);
  EXPECT_EQ(std::count(z.values.begin(), z.values.end(), 2.0), 1);
  EXPECT_EQ(std::count(z.values.begin(), z.values.end(), 1.0), 8);
}

TEST(LevelSet, SmoothExamples) {
  const Mesh mesh(1, 11);
  for (double v : levelset_smooth(NodalField(mesh, 0.0), 1.0, 2.0, 10.0).values) EXPECT_DOUBLE_EQ(v, 1.5);

  // Node 0 is chosen so that its normalized value is exactly 0.1: with every
  // other node at 1 the trapezoidal norm squared is 0.05 t^2 + 0.95.
  NodalField a(mesh, 1.0);
  a[0] = std::sqrt(0.0095 / 0.9995);
  ASSERT_NEAR(a[0] / l2_norm(a), 0.1, 1e-14);
  EXPECT_NEAR(levelset_smooth(a, 1.0, 2.0, 10.0)[0], 1.8808, 1e-4);

  EXPECT_NEAR(levelset_smooth(NodalField(mesh, 1.0), 1.0, 2.0, 1e4)[3], 2.0, 1e-15);
}

TEST(Lognormal, Examples) {
  const Mesh mesh(1, 9);
  for (double v : lognormal_map(NodalField(mesh, 0.0)).values) EXPECT_EQ(v, 1.0);
  NodalField a(mesh, 0.0);
  a[3] = std::log(2.0);
  EXPECT_NEAR(lognormal_map(a)[3], 2.0, 1e-15);
  for (double v : push_sample(lognormal_2d(0.0), 5, Mesh(2, 9)).values) EXPECT_EQ(v, 1.0);
}

TEST(Properties, SmoothConvergesToSharp) {
  const PriorSpec s = levelset_1d();
  const Mesh mesh(1, 65);
  const NodalField a = synthesize_grf(sample_latent(21, s), s, mesh);
  const double norm = l2_norm(a);
  for (double v : a.values) ASSERT_GT(std::abs(v / norm), 1e-4);
  const NodalField smooth = levelset_smooth(a, 1.0, 2.0, 1e6);
  const NodalField sharp = levelset_sharp(a, 1.0, 2.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(smooth[i] - sharp[i]), 1e-6);
}

TEST(Properties, Bounds) {
  const Mesh mesh(1, 65);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PriorSpec s = levelset_1d();
    for (double v : push_sample(s, seed, mesh).values) {
      EXPECT_GE(v, 1.0);
      EXPECT_LE(v, 2.0);
    }
    for (double v : push_sample(levelset_1d(PriorFamily::LevelSetSharp), seed, mesh).values)
      EXPECT_TRUE(v == 1.0 || v == 2.0);
    for (double v : push_sample(lognormal_2d(), seed, Mesh(2, 9)).values) EXPECT_GT(v, 0.0);
  }
}

TEST(Properties, SmoothIsScaleInvariant) {
  const PriorSpec s = levelset_1d();
  const Mesh mesh(1, 33);
  NodalField a = synthesize_grf(sample_latent(4, s), s, mesh);
  const NodalField z1 = levelset_smooth(a, 1.0, 2.0, 10.0);
  for (double& v : a.values) v *= 4.0;
  const NodalField z2 = levelset_smooth(a, 1.0, 2.0, 10.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(z1[i], z2[i], 1e-15);
}

TEST(Properties, ZeroFieldDoesNotCrash) {
  const NodalField z = levelset_smooth(NodalField(Mesh(1, 9), 0.0), 1.0, 3.0, 10.0);
  for (double v : z.values) EXPECT_EQ(v, 2.0);
}

TEST(Properties, PushSampleIsPure) {
  const PriorSpec s = lognormal_2d();
  const Mesh mesh(2, 17);
  EXPECT_EQ(push_sample(s, 9, mesh).values, push_sample(s, 9, mesh).values);
  const PriorSampler sampler(s, mesh);
  EXPECT_EQ(sampler.sample(9).values, push_sample(s, 9, mesh).values);
}
