#include "priorflow/mesh.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace priorflow {

Mesh::Mesh(int dim_, int n_) : dim(dim_), n(n_) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("mesh dimension must be 1 or 2, got " + std::to_string(dim));
  if (n < 3) throw std::invalid_argument("mesh needs at least 3 nodes per side, got " + std::to_string(n));
}

std::size_t Mesh::node_count() const noexcept {
  const auto side = static_cast<std::size_t>(n);
  return dim == 1 ? side : side * side;
}

std::size_t Mesh::interior_count() const noexcept {
  const std::size_t side = interior_side();
  return dim == 1 ? side : side * side;
}

bool Mesh::is_boundary(std::size_t node) const noexcept {
  const auto last = static_cast<std::size_t>(n - 1);
  if (dim == 1) return node == 0 || node == last;
  const std::size_t j = node / static_cast<std::size_t>(n);
  const std::size_t k = node % static_cast<std::size_t>(n);
  return j == 0 || k == 0 || j == last || k == last;
}

std::array<double, 2> Mesh::coords(std::size_t node) const noexcept {
  if (dim == 1) return {static_cast<double>(node) * h(), 0.0};
  const std::size_t j = node / static_cast<std::size_t>(n);
  const std::size_t k = node % static_cast<std::size_t>(n);
  return {static_cast<double>(k) * h(), static_cast<double>(j) * h()};
}

std::vector<std::size_t> Mesh::interior_nodes() const {
  std::vector<std::size_t> out;
  out.reserve(interior_count());
  for (std::size_t i = 0; i < node_count(); ++i)
    if (!is_boundary(i)) out.push_back(i);
  return out;
}

NodalField::NodalField(const Mesh& m, double fill) : mesh(m), values(m.node_count(), fill) {}

NodalField::NodalField(const Mesh& m, std::vector<double> v) : mesh(m), values(std::move(v)) {
  if (values.size() != mesh.node_count())
    throw std::invalid_argument("nodal field has " + std::to_string(values.size()) + " values, mesh has " +
                                std::to_string(mesh.node_count()) + " nodes");
  for (double x : values)
    if (!std::isfinite(x)) throw std::invalid_argument("nodal field contains a non-finite value");
}

}  // namespace priorflow
