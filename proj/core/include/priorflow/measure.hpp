#pragma once

// Divergences between equal-size empirical measures: exact 1D Wasserstein-2,
// the Dirac closed form, and Monte Carlo sliced Wasserstein under a scalar
// noise weighting Gamma = gamma_std^2 I.

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace priorflow::measure {

/// m points in R^d, one per row.
using EmpiricalBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unit directions, one per row.
struct DirectionSet {
  EmpiricalBatch dirs;
  std::uint64_t seed = 0;

  Eigen::Index size() const noexcept { return dirs.rows(); }
  Eigen::Index dim() const noexcept { return dirs.cols(); }
};

/// i.i.d. uniform directions on S^{d-1} (normalized Gaussian vectors).
DirectionSet sample_sphere(int d, int n_dirs, std::uint64_t seed);

/// Squared W2 between two equal-size 1D empirical measures (sorted coupling).
double w2sq_1d(std::span<const double> xs, std::span<const double> ys);

/// W2^2_Gamma(delta_y, batch) = mean_i |y - x_i|^2 / gamma_std^2.
double w2sq_dirac(std::span<const double> y, const EmpiricalBatch& batch, double gamma_std);

/// Projections <x / gamma_std, theta> for every direction, each row sorted.
/// Row t holds the sorted slice for direction t.
class SortedSlices {
 public:
  SortedSlices(const EmpiricalBatch& batch, const DirectionSet& dirs, double gamma_std);

  Eigen::Index directions() const noexcept { return proj_.rows(); }
  Eigen::Index samples() const noexcept { return proj_.cols(); }
  const EmpiricalBatch& values() const noexcept { return proj_; }

 private:
  EmpiricalBatch proj_;
};

/// Mean over directions of w2sq_1d between matching sorted slices.
double sw2sq(const SortedSlices& a, const SortedSlices& b);

/// Monte Carlo weighted sliced-Wasserstein squared distance.
double sw2sq(const EmpiricalBatch& x, const EmpiricalBatch& y, double gamma_std, const DirectionSet& dirs);
double sw2sq(const EmpiricalBatch& x, const EmpiricalBatch& y, double gamma_std, int n_dirs, std::uint64_t seed);

}  // namespace priorflow::measure
