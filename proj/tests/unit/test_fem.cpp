#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "priorflow/checks/oracles.hpp"
#include "priorflow/dataset.hpp"
#include "priorflow/fem.hpp"
#include "priorflow/rng.hpp"

using namespace priorflow;

namespace {

NodalField quadratic_1d(const Mesh& mesh) {
  NodalField u(mesh);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = mesh.coords(i)[0];
    u[i] = 5.0 * x * (1.0 - x);
  }
  return u;
}

NodalField random_field(const Mesh& mesh, Rng& rng, double lo, double hi, bool zero_boundary) {
  std::uniform_real_distribution<double> dist(lo, hi);
  NodalField v(mesh);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (zero_boundary && mesh.is_boundary(i)) ? 0.0 : dist(rng);
  return v;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

randfield::PriorSpec sharp_truth() {
  randfield::PriorSpec s;
  s.family = randfield::PriorFamily::LevelSetSharp;
  s.alpha = {8.0, 1.0, 2.0};
  return s;
}

}  // namespace

TEST(Residual1D, Examples) {
  const Mesh mesh(1, 33);
  for (double r : fem::residual(NodalField(mesh, 1.0), NodalField(mesh), NodalField(mesh))) EXPECT_EQ(r, 0.0);
  EXPECT_LT(max_abs(fem::residual(NodalField(mesh, 1.0), quadratic_1d(mesh), NodalField(mesh, 10.0))), 1e-12);

  const Mesh quarter(1, 5);
  const auto r = fem::residual(NodalField(quarter, 3.0), NodalField(quarter), NodalField(quarter, 10.0));
  ASSERT_EQ(r.size(), 3u);
  for (double v : r) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(Residual2D, LoadOnly) {
  const Mesh mesh(2, 7);
  const double h = mesh.h();
  for (double r : fem::residual(NodalField(mesh, 1.0), NodalField(mesh), NodalField(mesh, 1.0)))
    EXPECT_NEAR(r, h * h, 1e-15);
}

TEST(Residual2D, ImpulseGivesFivePointLaplacian) {
  const Mesh mesh(2, 7);
  NodalField u(mesh);
  const std::size_t n = 7, j = 3, k = 2;
  u[j * n + k] = 1.0;
  std::vector<double> out(mesh.interior_count());
  fem::stiffness_action(NodalField(mesh, 1.0), u.values, out);
  const auto interior = mesh.interior_nodes();
  for (std::size_t i = 0; i < interior.size(); ++i) {
    const std::size_t node = interior[i];
    const std::size_t r = node / n, c = node % n;
    double expected = 0.0;
    if (node == j * n + k) expected = 4.0;
    else if ((r == j && (c + 1 == k || c == k + 1)) || (c == k && (r + 1 == j || r == j + 1))) expected = -1.0;
    EXPECT_NEAR(out[i], expected, 1e-14) << "node " << node;
  }
}

TEST(Residual2D, MatchesDenseAssembly) {
  Rng rng(17);
  const Mesh mesh(2, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const NodalField z = random_field(mesh, rng, 0.5, 3.0, false);
    const NodalField u = random_field(mesh, rng, -1.0, 1.0, true);
    const NodalField f = random_field(mesh, rng, -5.0, 5.0, false);
    const auto a = fem::residual(z, u, f);
    const auto b = checks::dense_residual(z, u, f);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Residual, RejectsNonzeroBoundary) {
  const Mesh mesh(1, 9);
  EXPECT_THROW(fem::residual(NodalField(mesh, 1.0), NodalField(mesh, 1.0), NodalField(mesh)), std::invalid_argument);
}

TEST(Stiffness, SymmetricPositiveDefinite) {
  Rng rng(23);
  for (int dim : {1, 2}) {
    const Mesh mesh(dim, 9);
    const NodalField z = random_field(mesh, rng, 0.2, 4.0, false);
    for (int trial = 0; trial < 5; ++trial) {
      const NodalField u = random_field(mesh, rng, -1.0, 1.0, true);
      const NodalField v = random_field(mesh, rng, -1.0, 1.0, true);
      std::vector<double> au(mesh.interior_count()), av(mesh.interior_count());
      fem::stiffness_action(z, u.values, au);
      fem::stiffness_action(z, v.values, av);
      const auto interior = mesh.interior_nodes();
      double uau = 0.0, vau = 0.0, uav = 0.0;
      for (std::size_t i = 0; i < interior.size(); ++i) {
        uau += u[interior[i]] * au[i];
        vau += v[interior[i]] * au[i];
        uav += u[interior[i]] * av[i];
      }
      EXPECT_GT(uau, 0.0);
      EXPECT_NEAR(vau, uav, 1e-12);
    }
  }
}

TEST(Solve, Examples1D) {
  const Mesh mesh(1, 257);
  EXPECT_NEAR(fem::solve_darcy(NodalField(mesh, 1.0), NodalField(mesh, 10.0))[128], 1.25, 1e-8);
  EXPECT_NEAR(fem::solve_darcy(NodalField(mesh, 2.0), NodalField(mesh, 10.0))[128], 0.625, 1e-8);
  for (double v : fem::solve_darcy(NodalField(mesh, 1.0), NodalField(mesh)).values) EXPECT_EQ(v, 0.0);
}

TEST(Solve, ResidualContract) {
  Rng rng(29);
  for (int dim : {1, 2}) {
    const Mesh mesh(dim, 17);
    const NodalField z = random_field(mesh, rng, 0.1, 5.0, false);
    const NodalField f(mesh, 10.0);
    fem::SolverOptions opts;
    opts.tol = 1e-9;
    const NodalField u = fem::solve_darcy(z, f, opts);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (mesh.is_boundary(i)) {
        EXPECT_EQ(u[i], 0.0);
      }
    const auto r = fem::residual(z, u, f);
    const auto load = fem::load_vector(f);
    const double rn = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
    const double ln = std::sqrt(std::inner_product(load.begin(), load.end(), load.begin(), 0.0));
    EXPECT_LE(rn, opts.tol * ln);
  }
}

TEST(Solve, ReportsNonConvergence) {
  const Mesh mesh(2, 17);
  fem::SolverOptions opts;
  opts.max_iter = 2;
  try {
    fem::solve_darcy(NodalField(mesh, 1.0), NodalField(mesh, 1.0), opts);
    FAIL() << "expected SolverError";
  } catch (const fem::SolverError& e) {
    EXPECT_EQ(e.iterations(), 2u);
    EXPECT_GT(e.residual_norm(), 0.0);
  }
}

TEST(Observe, Examples) {
  const Mesh mesh(1, 9);
  const std::vector<std::size_t> nodes{4, 4, 2};
  const auto y = fem::observe(quadratic_1d(mesh), nodes);
  EXPECT_DOUBLE_EQ(y[0], 1.25);
  EXPECT_EQ(y[0], y[1]);
  for (double v : fem::observe(NodalField(mesh), nodes)) EXPECT_EQ(v, 0.0);
}

TEST(Observe, NoiseFreeSimulationEqualsSolve) {
  const Mesh mesh(1, 33);
  const NodalField z(mesh, 1.5), f(mesh, 10.0);
  const std::vector<std::size_t> nodes{3, 10, 20};
  EXPECT_EQ(fem::simulate_observation(z, f, nodes, 0.0, 99), fem::observe(fem::solve_darcy(z, f), nodes));
  EXPECT_EQ(fem::simulate_observation(z, f, nodes, 0.01, 99), fem::simulate_observation(z, f, nodes, 0.01, 99));
  EXPECT_NE(fem::simulate_observation(z, f, nodes, 0.01, 99), fem::simulate_observation(z, f, nodes, 0.01, 98));
}

TEST(Dataset, SingleNoiseFreeRow) {
  const Mesh mesh(1, 33);
  const auto truth = sharp_truth();
  const Dataset ds = generate_dataset(truth, 1, 5, 0.0, 10.0, mesh, 42);
  const NodalField z = randfield::push_sample(truth, derive_seed(ds.seeds.latent, 0), mesh);
  const auto expected = fem::observe(fem::solve_darcy(z, NodalField(mesh, 10.0)), ds.obs_nodes);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(ds.row(0)[i], expected[i]);
}

TEST(Dataset, ShapeAndObservationNodes) {
  const Mesh mesh(1, 65);
  const Dataset ds = generate_dataset(sharp_truth(), 40, 50, 0.01, 10.0, mesh, 1);
  EXPECT_EQ(ds.observations.size(), 40u * 50u);
  EXPECT_TRUE(std::is_sorted(ds.obs_nodes.begin(), ds.obs_nodes.end()));
  EXPECT_EQ(std::adjacent_find(ds.obs_nodes.begin(), ds.obs_nodes.end()), ds.obs_nodes.end());
  for (std::size_t node : ds.obs_nodes) EXPECT_FALSE(mesh.is_boundary(node));
}

TEST(Dataset, DeterministicAndRoundTrips) {
  const Mesh mesh(2, 9);
  randfield::PriorSpec truth = sharp_truth();
  truth.dim = 2;
  truth.modes_j = truth.modes_k = 5;
  const Dataset a = generate_dataset(truth, 6, 10, 0.01, 10.0, mesh, 5);
  const Dataset b = generate_dataset(truth, 6, 10, 0.01, 10.0, mesh, 5);
  const std::string text = dump_json(to_json(a));
  EXPECT_EQ(text, dump_json(to_json(b)));

  const auto path = std::filesystem::temp_directory_path() / "priorflow_test_dataset.json";
  save_dataset(a, path);
  const Dataset c = load_dataset(path);
  std::filesystem::remove(path);
  EXPECT_EQ(c.observations, a.observations);
  EXPECT_EQ(dump_json(to_json(c)), text);
}

TEST(Dataset, LoadRejectsBadDocuments) {
  const Dataset a = generate_dataset(sharp_truth(), 2, 3, 0.01, 10.0, Mesh(1, 9), 5);
  auto doc = to_json(a);
  doc["gamma_std"] = 0.0;
  EXPECT_ANY_THROW(dataset_from_json(doc));
  doc = to_json(a);
  doc["observations"].erase(doc["observations"].begin());
  EXPECT_ANY_THROW(dataset_from_json(doc));
}
