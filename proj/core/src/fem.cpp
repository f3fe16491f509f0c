#include "priorflow/fem.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "priorflow/rng.hpp"

namespace priorflow::fem {
namespace {

void require_same_mesh(const NodalField& a, const NodalField& b, const char* what) {
  if (!(a.mesh == b.mesh)) throw std::invalid_argument(std::string(what) + ": fields live on different meshes");
}

void require_zero_boundary(const NodalField& u) {
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u.mesh.is_boundary(i) && u[i] != 0.0)
      throw std::invalid_argument("residual: u must vanish on the boundary (node " + std::to_string(i) + ")");
}

// K(z) u on interior rows. u is a full-grid array; out has interior_count entries.
void apply_1d(const double* z, const double* u, double* out, std::size_t n, double h) {
  const double inv_h = 1.0 / h;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    // Element [j-1, j] carries z at its left node, [j, j+1] carries z_j.
    out[j - 1] = inv_h * (z[j - 1] * (u[j] - u[j - 1]) + z[j] * (u[j] - u[j + 1]));
  }
}

// Stencils for the P1 triangulation with z piecewise constant from the top-left
// node of each square. Row j runs along x2, column k along x1.
void apply_2d(const double* z, const double* u, double* out, std::size_t n) {
  const std::size_t m = n - 2;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double* z_up = z + (j - 1) * n;
    const double* z_mid = z + j * n;
    const double* u_up = u + (j - 1) * n;
    const double* u_mid = u + j * n;
    const double* u_dn = u + (j + 1) * n;
    double* o = out + (j - 1) * m;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double r_x1 = 0.5 * ((z_up[k - 1] + z_mid[k - 1]) * (u_mid[k] - u_mid[k - 1]) -
                                 (z_mid[k] + z_up[k]) * (u_mid[k + 1] - u_mid[k]));
      const double r_x2 = 0.5 * ((z_mid[k - 1] + z_mid[k]) * (u_mid[k] - u_dn[k]) -
                                 (z_up[k] + z_up[k - 1]) * (u_up[k] - u_mid[k]));
      o[k - 1] = r_x1 + r_x2;
    }
  }
}

void apply(const NodalField& z, const double* u_full, double* out) {
  const auto n = static_cast<std::size_t>(z.mesh.n);
  if (z.mesh.dim == 1)
    apply_1d(z.values.data(), u_full, out, n, z.mesh.h());
  else
    apply_2d(z.values.data(), u_full, out, n);
}

std::vector<double> diagonal(const NodalField& z) {
  const Mesh& mesh = z.mesh;
  const auto n = static_cast<std::size_t>(mesh.n);
  std::vector<double> d(mesh.interior_count());
  if (mesh.dim == 1) {
    for (std::size_t j = 1; j + 1 < n; ++j) d[j - 1] = (z[j - 1] + z[j]) / mesh.h();
    return d;
  }
  const std::size_t m = n - 2;
  for (std::size_t j = 1; j + 1 < n; ++j)
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double zul = z[(j - 1) * n + k - 1], zu = z[(j - 1) * n + k];
      const double zl = z[j * n + k - 1], zc = z[j * n + k];
      d[(j - 1) * m + k - 1] = 0.5 * ((zul + zl) + (zc + zu)) + 0.5 * ((zl + zc) + (zu + zul));
    }
  return d;
}

void scatter_interior(const Mesh& mesh, std::span<const double> interior, std::vector<double>& full) {
  const auto n = static_cast<std::size_t>(mesh.n);
  if (mesh.dim == 1) {
    for (std::size_t j = 1; j + 1 < n; ++j) full[j] = interior[j - 1];
    return;
  }
  const std::size_t m = n - 2;
  for (std::size_t j = 1; j + 1 < n; ++j)
    for (std::size_t k = 1; k + 1 < n; ++k) full[j * n + k] = interior[(j - 1) * m + k - 1];
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

void stiffness_action(const NodalField& z, std::span<const double> u_full, std::span<double> out_interior) {
  if (u_full.size() != z.mesh.node_count() || out_interior.size() != z.mesh.interior_count())
    throw std::invalid_argument("stiffness_action: size mismatch");
  apply(z, u_full.data(), out_interior.data());
}

void stiffness_transpose_action(const NodalField& z, std::span<const double> r_interior, std::span<double> out_full) {
  const Mesh& mesh = z.mesh;
  if (r_interior.size() != mesh.interior_count() || out_full.size() != mesh.node_count())
    throw std::invalid_argument("stiffness_transpose_action: size mismatch");
  const auto n = static_cast<std::size_t>(mesh.n);
  std::vector<double> r(mesh.node_count(), 0.0);
  scatter_interior(mesh, r_interior, r);
  std::fill(out_full.begin(), out_full.end(), 0.0);
  // The interior rows of the full symmetric edge operator, transposed, equal the
  // full operator applied to the zero-padded vector.
  auto edge = [&](std::size_t a, std::size_t b, double w) {
    const double d = w * (r[a] - r[b]);
    out_full[a] += d;
    out_full[b] -= d;
  };
  if (mesh.dim == 1) {
    const double inv_h = 1.0 / mesh.h();
    for (std::size_t i = 0; i + 1 < n; ++i) edge(i, i + 1, z[i] * inv_h);
    return;
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t c = j * n + k;
      if (k + 1 < n) {
        double w = 0.0;
        if (j >= 1) w += 0.5 * z[(j - 1) * n + k];
        if (j + 1 < n) w += 0.5 * z[c];
        edge(c, c + 1, w);
      }
      if (j + 1 < n) {
        double w = 0.0;
        if (k >= 1) w += 0.5 * z[c - 1];
        if (k + 1 < n) w += 0.5 * z[c];
        edge(c, c + n, w);
      }
    }
}

std::vector<double> load_vector(const NodalField& f) {
  const Mesh& mesh = f.mesh;
  const auto n = static_cast<std::size_t>(mesh.n);
  const double h = mesh.h();
  std::vector<double> out(mesh.interior_count());
  if (mesh.dim == 1) {
    // Mass-lumped load.
    for (std::size_t j = 1; j + 1 < n; ++j) out[j - 1] = h * f[j];
    return out;
  }
  // One-point Gauss rule on each of the six triangles around the node.
  const std::size_t m = n - 2;
  const double w = h * h / 9.0;
  for (std::size_t j = 1; j + 1 < n; ++j)
    for (std::size_t k = 1; k + 1 < n; ++k) {
      auto F = [&](std::size_t jj, std::size_t kk) { return f[jj * n + kk]; };
      out[(j - 1) * m + k - 1] = w * (3.0 * F(j, k) + F(j - 1, k - 1) + F(j, k - 1) + F(j + 1, k) +
                                       F(j + 1, k + 1) + F(j, k + 1) + F(j - 1, k));
    }
  return out;
}

std::vector<double> residual_1d(const NodalField& z, const NodalField& u, const NodalField& f) {
  if (z.mesh.dim != 1) throw std::invalid_argument("residual_1d: mesh is not one-dimensional");
  require_same_mesh(z, u, "residual_1d");
  require_same_mesh(z, f, "residual_1d");
  require_zero_boundary(u);
  std::vector<double> r = load_vector(f);
  std::vector<double> ku(r.size());
  apply(z, u.values.data(), ku.data());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= ku[i];
  return r;
}

std::vector<double> residual_2d(const NodalField& z, const NodalField& u, const NodalField& f) {
  if (z.mesh.dim != 2) throw std::invalid_argument("residual_2d: mesh is not two-dimensional");
  if (z.mesh.n < 3) throw std::invalid_argument("residual_2d: mesh too small");
  require_same_mesh(z, u, "residual_2d");
  require_same_mesh(z, f, "residual_2d");
  require_zero_boundary(u);
  std::vector<double> r = load_vector(f);
  std::vector<double> ku(r.size());
  apply(z, u.values.data(), ku.data());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= ku[i];
  return r;
}

std::vector<double> residual(const NodalField& z, const NodalField& u, const NodalField& f) {
  return z.mesh.dim == 1 ? residual_1d(z, u, f) : residual_2d(z, u, f);
}

NodalField solve_darcy(const NodalField& z, const NodalField& f, const SolverOptions& opts, SolveReport* report) {
  require_same_mesh(z, f, "solve_darcy");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve_darcy: tolerance must be positive");
  for (double v : z.values)
    if (!(v > 0.0)) throw std::invalid_argument("solve_darcy: permeability must be positive everywhere");

  const Mesh& mesh = z.mesh;
  const std::size_t m = mesh.interior_count();
  const std::size_t max_iter = opts.max_iter ? opts.max_iter : 10 * m;
  const std::vector<double> b = load_vector(f);
  const double b_norm = std::sqrt(dot(b, b));
  NodalField u(mesh, 0.0);
  if (report) *report = {};
  if (b_norm == 0.0) return u;

  std::vector<double> inv_diag;
  if (opts.jacobi) {
    inv_diag = diagonal(z);
    for (double& d : inv_diag) d = 1.0 / d;
  }

  std::vector<double> x(m, 0.0), r = b, p(m), q(m), s(m);
  std::vector<double> full(mesh.node_count(), 0.0);
  auto matvec = [&](const std::vector<double>& in, std::vector<double>& out) {
    scatter_interior(mesh, in, full);
    apply(z, full.data(), out.data());
  };
  auto precondition = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (inv_diag.empty()) {
      out = in;
      return;
    }
    for (std::size_t i = 0; i < m; ++i) out[i] = inv_diag[i] * in[i];
  };

  const double target = opts.tol * b_norm;
  std::size_t it = 0;
  double r_norm = b_norm;
  // CG with restarts: the recursive residual can drift from the true one, so
  // convergence is confirmed against a freshly computed residual.
  while (it < max_iter) {
    precondition(r, s);
    p = s;
    double rs = dot(r, s);
    while (it < max_iter) {
      r_norm = std::sqrt(dot(r, r));
      if (r_norm <= target) break;
      matvec(p, q);
      const double pq = dot(p, q);
      if (!(pq > 0.0)) throw SolverError("solve_darcy: stiffness operator lost positive definiteness", it, r_norm / b_norm);
      const double step = rs / pq;
      for (std::size_t i = 0; i < m; ++i) {
        x[i] += step * p[i];
        r[i] -= step * q[i];
      }
      ++it;
      precondition(r, s);
      const double rs_new = dot(r, s);
      const double beta = rs_new / rs;
      rs = rs_new;
      for (std::size_t i = 0; i < m; ++i) p[i] = s[i] + beta * p[i];
    }
    matvec(x, q);
    for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - q[i];
    r_norm = std::sqrt(dot(r, r));
    if (r_norm <= target) break;
  }
  if (r_norm > target)
    throw SolverError("solve_darcy: CG did not converge in " + std::to_string(it) +
                          " iterations (relative residual " + std::to_string(r_norm / b_norm) + ")",
                      it, r_norm / b_norm);

  scatter_interior(mesh, x, u.values);
  if (report) *report = {it, r_norm / b_norm};
  return u;
}

std::vector<double> observe(const NodalField& u, std::span<const std::size_t> obs_nodes) {
  std::vector<double> y;
  y.reserve(obs_nodes.size());
  for (std::size_t node : obs_nodes) {
    if (node >= u.size())
      throw std::out_of_range("observe: node index " + std::to_string(node) + " outside mesh of " +
                              std::to_string(u.size()) + " nodes");
    y.push_back(u[node]);
  }
  return y;
}

void add_observation_noise(std::span<double> y, double gamma_std, std::uint64_t noise_seed) {
  if (gamma_std < 0.0) throw std::invalid_argument("noise standard deviation must be nonnegative");
  if (gamma_std == 0.0) return;
  Rng rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : y) v += gamma_std * normal(rng);
}

std::vector<double> simulate_observation(const NodalField& z, const NodalField& f,
                                         std::span<const std::size_t> obs_nodes, double gamma_std,
                                         std::uint64_t noise_seed, const SolverOptions& opts) {
  std::vector<double> y = observe(solve_darcy(z, f, opts), obs_nodes);
  add_observation_noise(y, gamma_std, noise_seed);
  return y;
}

}  // namespace priorflow::fem
