#include "priorflow/checks/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "priorflow/fem.hpp"

namespace priorflow::checks {

double brute_force_w2sq(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.empty()) throw std::invalid_argument("brute_force_w2sq: need equal nonempty sizes");
  std::vector<std::size_t> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc += (xs[i] - ys[perm[i]]) * (xs[i] - ys[perm[i]]);
    best = std::min(best, acc / static_cast<double>(xs.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace {

template <class Fn>
void for_each_triangle(const Mesh& mesh, Fn&& fn) {
  const auto n = static_cast<std::size_t>(mesh.n);
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const std::size_t a = j * n + k, b = j * n + k + 1, c = (j + 1) * n + k, d = (j + 1) * n + k + 1;
      fn(std::array<std::size_t, 3>{a, b, d}, a);
      fn(std::array<std::size_t, 3>{a, c, d}, a);
    }
}

struct Geometry {
  double area;
  std::array<std::array<double, 2>, 3> grad;
};

Geometry triangle_geometry(const Mesh& mesh, const std::array<std::size_t, 3>& v) {
  const auto p0 = mesh.coords(v[0]), p1 = mesh.coords(v[1]), p2 = mesh.coords(v[2]);
  const double b00 = p1[0] - p0[0], b01 = p2[0] - p0[0];
  const double b10 = p1[1] - p0[1], b11 = p2[1] - p0[1];
  const double det = b00 * b11 - b01 * b10;
  // Rows of B^{-1} are the gradients of the barycentric coordinates of p1 and p2.
  Geometry g;
  g.area = 0.5 * std::abs(det);
  g.grad[1] = {b11 / det, -b01 / det};
  g.grad[2] = {-b10 / det, b00 / det};
  g.grad[0] = {-g.grad[1][0] - g.grad[2][0], -g.grad[1][1] - g.grad[2][1]};
  return g;
}

}  // namespace

std::vector<double> dense_stiffness(const NodalField& z) {
  const Mesh& mesh = z.mesh;
  const std::size_t N = mesh.node_count();
  std::vector<double> K(N * N, 0.0);
  if (mesh.dim == 1) {
    const double h = mesh.h();
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const double w = z[i] / h;
      K[i * N + i] += w;
      K[(i + 1) * N + i + 1] += w;
      K[i * N + i + 1] -= w;
      K[(i + 1) * N + i] -= w;
    }
    return K;
  }
  for_each_triangle(mesh, [&](const std::array<std::size_t, 3>& v, std::size_t zn) {
    const Geometry g = triangle_geometry(mesh, v);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        K[v[a] * N + v[b]] += z[zn] * g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
  });
  return K;
}

std::vector<double> dense_load(const NodalField& f) {
  const Mesh& mesh = f.mesh;
  std::vector<double> F(mesh.node_count(), 0.0);
  if (mesh.dim == 1) {
    for (std::size_t i = 0; i < F.size(); ++i) F[i] = mesh.h() * f[i];
    return F;
  }
  for_each_triangle(mesh, [&](const std::array<std::size_t, 3>& v, std::size_t) {
    const Geometry g = triangle_geometry(mesh, v);
    const double centroid = (f[v[0]] + f[v[1]] + f[v[2]]) / 3.0;
    for (std::size_t a : v) F[a] += g.area * centroid / 3.0;
  });
  return F;
}

std::vector<double> dense_residual(const NodalField& z, const NodalField& u, const NodalField& f) {
  const auto K = dense_stiffness(z);
  const auto F = dense_load(f);
  const std::size_t N = z.mesh.node_count();
  std::vector<double> r;
  for (std::size_t i : z.mesh.interior_nodes()) {
    double ku = 0.0;
    for (std::size_t c = 0; c < N; ++c) ku += K[i * N + c] * u[c];
    r.push_back(F[i] - ku);
  }
  return r;
}

std::vector<ConvergenceRow> manufactured_convergence_2d(std::span<const int> sizes) {
  std::vector<ConvergenceRow> rows;
  for (int n : sizes) {
    const Mesh mesh(2, n);
    NodalField exact(mesh), f(mesh);
    for (std::size_t p = 0; p < mesh.node_count(); ++p) {
      const auto x = mesh.coords(p);
      exact[p] = std::sin(std::numbers::pi * x[0]) * std::sin(std::numbers::pi * x[1]);
      f[p] = 2.0 * std::numbers::pi * std::numbers::pi * exact[p];
    }
    const NodalField u = fem::solve_darcy(NodalField(mesh, 1.0), f, {1e-12, 0, false});
    double err = 0.0;
    for (std::size_t p = 0; p < mesh.node_count(); ++p) err = std::max(err, std::abs(u[p] - exact[p]));
    ConvergenceRow row{n, mesh.h(), err, rows.empty() ? 0.0 : rows.back().max_error / err};
    rows.push_back(row);
  }
  return rows;
}

}  // namespace priorflow::checks
