#include <gtest/gtest.h>

#include "priorflow/checks/oracles.hpp"
#include "priorflow/checks/suites.hpp"
#include "priorflow/measure.hpp"
#include "priorflow/rng.hpp"

using namespace priorflow;
using namespace priorflow::measure;

namespace {

EmpiricalBatch random_batch(int m, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmpiricalBatch b(m, d);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) b(i, k) = normal(rng);
  return b;
}

}  // namespace

TEST(Sphere, UnitRows) {
  const DirectionSet s = sample_sphere(7, 500, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) EXPECT_NEAR(s.dirs.row(i).norm(), 1.0, 1e-12);
  const DirectionSet one = sample_sphere(1, 200, 3);
  for (Eigen::Index i = 0; i < one.size(); ++i) EXPECT_TRUE(one.dirs(i, 0) == 1.0 || one.dirs(i, 0) == -1.0);
}

TEST(Sphere, SecondMomentIsIsotropic) {
  const int d = 4;
  const DirectionSet s = sample_sphere(d, 100000, 8);
  const Eigen::MatrixXd cov = s.dirs.transpose() * s.dirs / static_cast<double>(s.size());
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) EXPECT_NEAR(cov(a, b), a == b ? 1.0 / d : 0.0, 0.01);
}

TEST(Sphere, Deterministic) {
  EXPECT_EQ(sample_sphere(3, 10, 5).dirs, sample_sphere(3, 10, 5).dirs);
  EXPECT_NE(sample_sphere(3, 10, 5).dirs, sample_sphere(3, 10, 6).dirs);
}

TEST(W2OneD, Examples) {
  const std::vector<double> a{3.0, -1.0, 2.0};
  const std::vector<double> a_perm{2.0, 3.0, -1.0};
  EXPECT_EQ(w2sq_1d(a, a_perm), 0.0);
  EXPECT_EQ(w2sq_1d(std::vector<double>{0.0}, std::vector<double>{3.0}), 9.0);
  EXPECT_EQ(w2sq_1d(std::vector<double>{0.0, 2.0}, std::vector<double>{1.0, 3.0}), 1.0);
  EXPECT_EQ(checks::brute_force_w2sq(std::vector<double>{0.0, 2.0}, std::vector<double>{3.0, 1.0}), 1.0);
}

TEST(W2OneD, RejectsUnequalCounts) {
  EXPECT_THROW(w2sq_1d(std::vector<double>{0.0}, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(w2sq_1d(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(W2OneD, MetricAxioms) {
  Rng rng(12);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(9), y(9);
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    EXPECT_EQ(w2sq_1d(x, y), w2sq_1d(y, x));
    EXPECT_GT(w2sq_1d(x, y), 0.0);
  }
}

TEST(W2OneD, MatchesPermutationOracle) {
  const auto r = checks::w2_brute_force(6, 50, 31);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Dirac, Examples) {
  EmpiricalBatch single(1, 2);
  single << 0.3, -0.7;
  EXPECT_EQ(w2sq_dirac(std::vector<double>{0.3, -0.7}, single, 0.5), 0.0);
  single << 1.0, 0.0;
  EXPECT_EQ(w2sq_dirac(std::vector<double>{0.0, 0.0}, single, 1.0), 1.0);
  single << 0.0, 0.0;
  EXPECT_NEAR(w2sq_dirac(std::vector<double>{0.02, 0.0}, single, 0.01), 4.0, 1e-12);
}

TEST(Sliced, IdenticalBatchesGiveZero) {
  const EmpiricalBatch x = random_batch(30, 6, 1);
  EXPECT_EQ(sw2sq(x, x, 0.3, 50, 2), 0.0);
}

TEST(Sliced, OneDimensionReducesToExact) {
  const EmpiricalBatch x = random_batch(25, 1, 4), y = random_batch(25, 1, 5);
  const std::vector<double> xs(x.data(), x.data() + 25), ys(y.data(), y.data() + 25);
  EXPECT_NEAR(sw2sq(x, y, 1.0, 40, 6), w2sq_1d(xs, ys), 1e-13);
}

TEST(Sliced, Symmetric) {
  const EmpiricalBatch x = random_batch(20, 3, 7), y = random_batch(20, 3, 8);
  const DirectionSet dirs = sample_sphere(3, 100, 9);
  EXPECT_EQ(sw2sq(x, y, 0.1, dirs), sw2sq(y, x, 0.1, dirs));
}

TEST(Sliced, CachedSlicesMatchDirectEvaluation) {
  const EmpiricalBatch x = random_batch(20, 3, 7), y = random_batch(20, 3, 8);
  const DirectionSet dirs = sample_sphere(3, 100, 9);
  EXPECT_EQ(sw2sq(SortedSlices(x, dirs, 0.2), SortedSlices(y, dirs, 0.2)), sw2sq(x, y, 0.2, dirs));
}

TEST(Lemmas, DiracSlicing) {
  checks::DiracSlicingOptions opts;
  opts.trials = 5;
  const auto r = checks::dirac_slicing(opts);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Lemmas, ConvolutionShift) {
  checks::ConvolutionShiftOptions opts;
  opts.draws = 2000;
  const auto r = checks::convolution_shift(opts);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Lemmas, WeightedPushforward) {
  const auto r = checks::weighted_pushforward();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Lemmas, SlicingVarianceShrinksWithDirections) {
  const EmpiricalBatch x = random_batch(50, 5, 10), y = random_batch(50, 5, 11);
  auto spread = [&](int n_dirs) {
    double s = 0.0, sq = 0.0;
    const int reps = 40;
    for (int r = 0; r < reps; ++r) {
      const double v = sw2sq(x, y, 1.0, n_dirs, derive_seed(12, Stream::Directions, r));
      s += v;
      sq += v * v;
    }
    return sq / reps - (s / reps) * (s / reps);
  };
  const double ratio = spread(25) / spread(400);
  EXPECT_GT(ratio, 16.0 / 3.0);
  EXPECT_LT(ratio, 16.0 * 3.0);
}
