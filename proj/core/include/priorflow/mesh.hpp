#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace priorflow {

/// Uniform structured mesh on [0,1]^dim with n nodes per side.
///
/// 2D nodes are stored row-major as (j, k) -> j * n + k. The row index j runs
/// along x2 and the column index k along x1; each square cell is split by the
/// diagonal joining its (j-1, k-1) and (j, k) corners.
struct Mesh {
  int dim = 1;
  int n = 3;

  Mesh() = default;
  Mesh(int dim_, int n_);

  std::size_t node_count() const noexcept;
  /// Interior nodes per side.
  std::size_t interior_side() const noexcept { return static_cast<std::size_t>(n - 2); }
  std::size_t interior_count() const noexcept;
  double h() const noexcept { return 1.0 / (n - 1); }

  bool is_boundary(std::size_t node) const noexcept;
  /// Physical coordinates (x1, x2); x2 is 0 in 1D.
  std::array<double, 2> coords(std::size_t node) const noexcept;
  /// Flattened node indices of the interior, in row-major order.
  std::vector<std::size_t> interior_nodes() const;

  bool operator==(const Mesh&) const = default;
};

/// Values of a scalar function at every node of a mesh.
struct NodalField {
  Mesh mesh;
  std::vector<double> values;

  NodalField() = default;
  explicit NodalField(const Mesh& m, double fill = 0.0);
  NodalField(const Mesh& m, std::vector<double> v);

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

}  // namespace priorflow
