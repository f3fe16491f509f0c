#include <gtest/gtest.h>

#include "priorflow/checks/suites.hpp"
#include "priorflow/rng.hpp"
#include "priorflow/tape.hpp"

using namespace priorflow;
using namespace priorflow::tape;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data) v = normal(rng);
  return t;
}

Var block(std::span<const Var> p, std::shared_ptr<const SpectralPlan> plan,
          std::shared_ptr<const std::vector<double>> mask) {
  Var spec = spectral_inverse(mode_multiply(p[1], spectral_forward(p[2], plan)), plan);
  Var pointwise = channel_contract(p[0], p[2]);
  Var merged = add(pointwise, mask_multiply(spec, mask));
  return mean_of_squares(silu(merged));
}

}  // namespace

TEST(Tape, ScalarExamples) {
  auto square = [](Tape&, std::span<const Var> p) { return mean_of_squares(p[0]); };
  EXPECT_NEAR(gradients(square, {Tensor({1}, {3.0})})[0].data[0], 6.0, 1e-15);

  auto act = [](Tape&, std::span<const Var> p) { return silu(p[0]); };
  EXPECT_NEAR(gradients(act, {Tensor({1}, {0.0})})[0].data[0], 0.5, 1e-15);

  Rng rng(1);
  const Tensor x = random_tensor({3, 4}, rng);
  const Tensor g = gradients(square, {x})[0];
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g.data[i], 2.0 * x.data[i] / 12.0, 1e-15);
}

TEST(Tape, ForwardValues) {
  Rng rng(2);
  Tape t;
  const Var x = t.leaf(random_tensor({2, 5}, rng));
  EXPECT_EQ(add(x, t.constant(Tensor({2, 5}))).value().data, x.value().data);
  const Var zero = t.leaf(Tensor({4}));
  for (double v : silu(zero).value().data) EXPECT_EQ(v, 0.0);
}

TEST(Tape, ShapeMismatchRejected) {
  Tape t;
  const Var a = t.leaf(Tensor({2, 3})), b = t.leaf(Tensor({3, 2}));
  EXPECT_THROW(add(a, b), std::invalid_argument);
  EXPECT_THROW(channel_contract(t.leaf(Tensor({2, 4})), a), std::invalid_argument);
}

TEST(Tape, GradBeforeBackwardRejected) {
  Tape t;
  const Var x = t.leaf(Tensor({2}, 1.0));
  mean_of_squares(x);
  EXPECT_THROW(t.grad(x), std::logic_error);
  EXPECT_THROW(t.backward(x), std::invalid_argument);
}

TEST(Tape, LinearAndConstantGraphs) {
  Rng rng(3);
  auto constant = [](Tape& t, std::span<const Var> p) {
    return mean_of_squares(add(scale(p[0], 0.0), t.constant(Tensor({3, 3}, 2.0))));
  };
  const auto g = gradients(constant, {random_tensor({3, 3}, rng)});
  for (double v : g[0].data) EXPECT_EQ(v, 0.0);

  auto linear = [](Tape& t, std::span<const Var> p) {
    return channel_contract(t.constant(Tensor({1, 4}, {1.0, -2.0, 0.5, 3.0})), p[0]);
  };
  EXPECT_LE(gradcheck(linear, {random_tensor({4, 1}, rng)}, 1e-4), 1e-10);
}

TEST(Tape, SpectralRoundTripWithAllModes) {
  Rng rng(4);
  for (auto [n1, n2] : {std::pair<std::size_t, std::size_t>{1, 17}, {9, 8}, {6, 7}}) {
    const auto plan = std::make_shared<SpectralPlan>(n1, n2, std::max(n1, n2));
    Tape t;
    const Tensor x = random_tensor({2, n1 * n2}, rng);
    const Var back = spectral_inverse(spectral_forward(t.leaf(x), plan), plan);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back.value().data[i], x.data[i], 1e-12);
  }
}

TEST(Tape, SpectralBlockGradcheck) {
  Rng rng(5);
  const auto plan = std::make_shared<SpectralPlan>(6, 6, 3);
  auto mask = std::make_shared<std::vector<double>>(36);
  for (auto& m : *mask) m = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const std::vector<Tensor> params{random_tensor({3, 3}, rng), random_tensor({3, 3, plan->rows(), plan->cols(), 2}, rng),
                                   random_tensor({3, 36}, rng)};
  auto build = [&](Tape&, std::span<const Var> p) { return block(p, plan, mask); };
  EXPECT_LT(gradcheck(build, params, 1e-4), 1e-5);
}

TEST(Tape, BackwardIsLinearInSeed) {
  Rng rng(6);
  const auto plan = std::make_shared<SpectralPlan>(1, 12, 4);
  auto mask = std::make_shared<std::vector<double>>(12, 0.5);
  const std::vector<Tensor> params{random_tensor({2, 2}, rng), random_tensor({2, 2, 1, 4, 2}, rng),
                                   random_tensor({2, 12}, rng)};
  auto build = [&](Tape&, std::span<const Var> p) { return block(p, plan, mask); };
  const auto g1 = gradients(build, params, 1.0);
  const auto g2 = gradients(build, params, 2.0);
  for (std::size_t k = 0; k < g1.size(); ++k)
    for (std::size_t i = 0; i < g1[k].size(); ++i) EXPECT_EQ(g2[k].data[i], 2.0 * g1[k].data[i]);
  const auto again = gradients(build, params, 1.0);
  for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_EQ(again[k].data, g1[k].data);
}

TEST(Tape, UnusedLeafHasZeroGradient) {
  Tape t;
  const Var x = t.leaf(Tensor({3}, 1.0));
  const Var unused = t.leaf(Tensor({2}, 5.0));
  t.backward(mean_of_squares(x));
  for (double g : t.grad(unused).data) EXPECT_EQ(g, 0.0);
}

TEST(Tape, PrimitiveSuite) {
  for (const auto& r : checks::tape_primitives(3, 77)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}
