#include "priorflow/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "priorflow/parallel.hpp"
#include "priorflow/rng.hpp"

namespace priorflow::measure {

DirectionSet sample_sphere(int d, int n_dirs, std::uint64_t seed) {
  if (d < 1 || n_dirs < 1) throw std::invalid_argument("sample_sphere: d and n_dirs must be at least 1");
  DirectionSet out{EmpiricalBatch(n_dirs, d), seed};
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < n_dirs; ++t) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (int i = 0; i < d; ++i) {
        const double g = normal(rng);
        out.dirs(t, i) = g;
        norm2 += g * g;
      }
    } while (norm2 == 0.0);
    out.dirs.row(t) /= std::sqrt(norm2);
  }
  return out;
}

double w2sq_1d(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("w2sq_1d: sample counts differ (" + std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()) + ")");
  if (xs.empty()) throw std::invalid_argument("w2sq_1d: empty samples");
  std::vector<double> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
  std::stable_sort(a.begin(), a.end());
  std::stable_sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double w2sq_dirac(std::span<const double> y, const EmpiricalBatch& batch, double gamma_std) {
  if (!(gamma_std > 0.0)) throw std::invalid_argument("w2sq_dirac: gamma_std must be positive");
  if (static_cast<Eigen::Index>(y.size()) != batch.cols()) throw std::invalid_argument("w2sq_dirac: dimension mismatch");
  if (batch.rows() == 0) throw std::invalid_argument("w2sq_dirac: empty batch");
  const Eigen::Map<const Eigen::RowVectorXd> point(y.data(), static_cast<Eigen::Index>(y.size()));
  const double total = (batch.rowwise() - point).rowwise().squaredNorm().sum();
  return total / (static_cast<double>(batch.rows()) * gamma_std * gamma_std);
}

SortedSlices::SortedSlices(const EmpiricalBatch& batch, const DirectionSet& dirs, double gamma_std) {
  if (!(gamma_std > 0.0)) throw std::invalid_argument("sliced Wasserstein: gamma_std must be positive");
  if (batch.cols() != dirs.dim())
    throw std::invalid_argument("sliced Wasserstein: batch dimension " + std::to_string(batch.cols()) +
                                " differs from direction dimension " + std::to_string(dirs.dim()));
  if (batch.rows() == 0) throw std::invalid_argument("sliced Wasserstein: empty batch");
  proj_.noalias() = dirs.dirs * batch.transpose();
  proj_ /= gamma_std;
  const Eigen::Index m = proj_.cols();
  parallel_for(static_cast<std::size_t>(proj_.rows()), [&](std::size_t t) {
    double* row = proj_.row(static_cast<Eigen::Index>(t)).data();
    std::sort(row, row + m);
  });
}

double sw2sq(const SortedSlices& a, const SortedSlices& b) {
  if (a.directions() != b.directions() || a.samples() != b.samples())
    throw std::invalid_argument("sw2sq: slice sets have different shapes");
  const Eigen::Index n_dirs = a.directions();
  std::vector<double> per_dir(static_cast<std::size_t>(n_dirs));
  const double inv_m = 1.0 / static_cast<double>(a.samples());
  for (Eigen::Index t = 0; t < n_dirs; ++t)
    per_dir[static_cast<std::size_t>(t)] = (a.values().row(t) - b.values().row(t)).squaredNorm() * inv_m;
  double acc = 0.0;
  for (double v : per_dir) acc += v;
  return acc / static_cast<double>(n_dirs);
}

double sw2sq(const EmpiricalBatch& x, const EmpiricalBatch& y, double gamma_std, const DirectionSet& dirs) {
  if (x.cols() != y.cols()) throw std::invalid_argument("sw2sq: batches have different dimensions");
  if (x.rows() != y.rows()) throw std::invalid_argument("sw2sq: batches have different sample counts");
  return sw2sq(SortedSlices(x, dirs, gamma_std), SortedSlices(y, dirs, gamma_std));
}

double sw2sq(const EmpiricalBatch& x, const EmpiricalBatch& y, double gamma_std, int n_dirs, std::uint64_t seed) {
  if (x.cols() != y.cols()) throw std::invalid_argument("sw2sq: batches have different dimensions");
  return sw2sq(x, y, gamma_std, sample_sphere(static_cast<int>(x.cols()), n_dirs, seed));
}

}  // namespace priorflow::measure
