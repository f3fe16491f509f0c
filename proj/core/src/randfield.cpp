#include "priorflow/randfield.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "priorflow/rng.hpp"

namespace priorflow::randfield {
namespace {

constexpr double kPi = std::numbers::pi;

double squared_wavenumber(int j, std::optional<int> k) {
  if (j < 1 || (k && *k < 1)) throw std::invalid_argument("mode indices start at 1");
  const double jj = static_cast<double>(j) * j;
  const double kk = k ? static_cast<double>(*k) * *k : 0.0;
  return (jj + kk) * kPi * kPi;
}

// Levels at or below this are treated as a zero field when normalizing.
constexpr double kDegenerateNorm = 1e-12;

}  // namespace

std::string_view to_string(PriorFamily family) noexcept {
  switch (family) {
    case PriorFamily::LevelSetSharp: return "levelset-sharp";
    case PriorFamily::LevelSetSmooth: return "levelset-smooth";
    case PriorFamily::Lognormal: return "lognormal";
  }
  return "unknown";
}

PriorFamily family_from_string(std::string_view name) {
  if (name == "levelset-sharp") return PriorFamily::LevelSetSharp;
  if (name == "levelset-smooth") return PriorFamily::LevelSetSmooth;
  if (name == "lognormal") return PriorFamily::Lognormal;
  throw std::invalid_argument("unknown prior family '" + std::string(name) +
                              "' (expected levelset-sharp, levelset-smooth or lognormal)");
}

bool is_level_set(PriorFamily family) noexcept { return family != PriorFamily::Lognormal; }

std::size_t PriorSpec::alpha_size(PriorFamily family) noexcept { return is_level_set(family) ? 3 : 2; }

std::vector<std::string> PriorSpec::alpha_names(PriorFamily family) {
  if (is_level_set(family)) return {"lambda", "kappa_minus", "kappa_plus"};
  return {"nu", "ell"};
}

std::size_t PriorSpec::mode_count() const noexcept {
  return dim == 1 ? static_cast<std::size_t>(modes_j) : static_cast<std::size_t>(modes_j) * modes_k;
}

void PriorSpec::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("prior dimension must be 1 or 2");
  if (alpha.size() != alpha_size(family))
    throw std::invalid_argument("prior family " + std::string(to_string(family)) + " expects " +
                                std::to_string(alpha_size(family)) + " alpha components, got " +
                                std::to_string(alpha.size()));
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("alpha components must be finite and positive");
  if (modes_j < 1 || (dim == 2 && modes_k < 1)) throw std::invalid_argument("KL truncation must keep at least one mode");
  if (is_level_set(family) && !(beta > dim / 2.0))
    throw std::invalid_argument("spectral decay beta must exceed d/2");
  if (family == PriorFamily::LevelSetSmooth && !(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (family == PriorFamily::Lognormal && !(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
}

double levelset_stddev(int j, std::optional<int> k, double lambda, double beta) {
  if (lambda < 0.0 || beta < 0.0) throw std::invalid_argument("levelset_stddev: lambda and beta must be nonnegative");
  return std::pow(squared_wavenumber(j, k) + lambda * lambda, -beta / 2.0);
}

double matern_gamma(double sigma, double nu, int dim) {
  if (!(nu > 0.0)) throw std::invalid_argument("matern: nu must be positive");
  const double d = dim;
  return sigma * sigma * std::pow(2.0, d) * std::pow(kPi, d / 2.0) * std::tgamma(nu + d / 2.0) / std::tgamma(nu);
}

double matern_stddev(int j, std::optional<int> k, double sigma, double ell, double nu, int dim) {
  if (!(ell > 0.0) || !(nu > 0.0)) throw std::invalid_argument("matern_stddev: ell and nu must be positive");
  if (sigma < 0.0) throw std::invalid_argument("matern_stddev: sigma must be nonnegative");
  const double d = dim;
  const double gamma = matern_gamma(sigma, nu, dim);
  const double var = gamma * std::pow(ell, d) * std::pow(ell * ell * squared_wavenumber(j, k) + 1.0, -nu - d / 2.0);
  return std::sqrt(var);
}

std::vector<double> mode_stddevs(const PriorSpec& spec) {
  spec.validate();
  std::vector<double> out;
  out.reserve(spec.mode_count());
  auto one = [&](int j, std::optional<int> k) {
    if (is_level_set(spec.family)) return levelset_stddev(j, k, spec.alpha[0], spec.beta);
    return matern_stddev(j, k, spec.sigma, spec.alpha[1], spec.alpha[0], spec.dim);
  };
  if (spec.dim == 1) {
    for (int j = 1; j <= spec.modes_j; ++j) out.push_back(one(j, std::nullopt));
  } else {
    for (int j = 1; j <= spec.modes_j; ++j)
      for (int k = 1; k <= spec.modes_k; ++k) out.push_back(one(j, k));
  }
  return out;
}

LatentDraw sample_latent(std::uint64_t seed, const PriorSpec& spec) {
  LatentDraw draw{std::vector<double>(spec.mode_count()), seed};
  Rng rng(seed);
  fill_standard_normal(rng, draw.eps);
  return draw;
}

SynthesisBasis::SynthesisBasis(const PriorSpec& spec, const Mesh& mesh)
    : mesh_(mesh), modes_j_(spec.modes_j), modes_k_(spec.dim == 2 ? spec.modes_k : 1) {
  if (spec.dim != mesh.dim)
    throw std::invalid_argument("prior dimension " + std::to_string(spec.dim) + " does not match mesh dimension " +
                                std::to_string(mesh.dim));
  const auto n = static_cast<std::size_t>(mesh.n);
  const double h = mesh.h();
  table_x1_.resize(n * modes_j_);
  for (std::size_t c = 0; c < n; ++c)
    for (int p = 0; p < modes_j_; ++p) table_x1_[c * modes_j_ + p] = std::cos((p + 1) * kPi * c * h);
  if (mesh.dim == 2) {
    table_x2_.resize(n * modes_k_);
    for (std::size_t r = 0; r < n; ++r)
      for (int q = 0; q < modes_k_; ++q) table_x2_[r * modes_k_ + q] = std::cos((q + 1) * kPi * r * h);
  }
}

NodalField SynthesisBasis::synthesize(std::span<const double> coeffs) const {
  const auto n = static_cast<std::size_t>(mesh_.n);
  const auto J = static_cast<std::size_t>(modes_j_);
  const auto K = static_cast<std::size_t>(modes_k_);
  if (coeffs.size() != J * K)
    throw std::invalid_argument("latent draw has " + std::to_string(coeffs.size()) + " entries, truncation needs " +
                                std::to_string(J * K));
  std::vector<double> a(mesh_.node_count(), 0.0);
  if (mesh_.dim == 1) {
    for (std::size_t c = 0; c < n; ++c) {
      const double* row = &table_x1_[c * J];
      double s = 0.0;
      for (std::size_t p = 0; p < J; ++p) s += coeffs[p] * row[p];
      a[c] = s;
    }
    return NodalField(mesh_, std::move(a));
  }
  // Mode p pairs with x1 (columns), mode q with x2 (rows).
  std::vector<double> partial(J * n, 0.0);  // partial[p * n + r] = sum_q C[p,q] cos(q pi x2_r)
  for (std::size_t p = 0; p < J; ++p)
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = &table_x2_[r * K];
      double s = 0.0;
      for (std::size_t q = 0; q < K; ++q) s += coeffs[p * K + q] * row[q];
      partial[p * n + r] = s;
    }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double* row = &table_x1_[c * J];
      double s = 0.0;
      for (std::size_t p = 0; p < J; ++p) s += row[p] * partial[p * n + r];
      a[r * n + c] = s;
    }
  return NodalField(mesh_, std::move(a));
}

NodalField synthesize_grf(const LatentDraw& draw, const PriorSpec& spec, const SynthesisBasis& basis) {
  const std::vector<double> std_dev = mode_stddevs(spec);
  if (draw.eps.size() != std_dev.size())
    throw std::invalid_argument("latent draw shape does not match the prior truncation");
  std::vector<double> coeffs(std_dev.size());
  for (std::size_t m = 0; m < coeffs.size(); ++m) coeffs[m] = std_dev[m] * draw.eps[m];
  return basis.synthesize(coeffs);
}

NodalField synthesize_grf(const LatentDraw& draw, const PriorSpec& spec, const Mesh& mesh) {
  return synthesize_grf(draw, spec, SynthesisBasis(spec, mesh));
}

double l2_norm(const NodalField& field) {
  const Mesh& mesh = field.mesh;
  const auto n = static_cast<std::size_t>(mesh.n);
  const double h = mesh.h();
  auto w = [n](std::size_t i) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; };
  double acc = 0.0;
  if (mesh.dim == 1) {
    for (std::size_t i = 0; i < n; ++i) acc += w(i) * field[i] * field[i];
    return std::sqrt(acc * h);
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double v = field[r * n + c];
      acc += w(r) * w(c) * v * v;
    }
  return std::sqrt(acc * h * h);
}

NodalField levelset_sharp(const NodalField& a, double kappa_minus, double kappa_plus) {
  if (!(kappa_minus > 0.0) || !(kappa_plus > 0.0)) throw std::invalid_argument("levelset: kappa values must be positive");
  NodalField z(a.mesh);
  for (std::size_t i = 0; i < a.size(); ++i) z[i] = a[i] < 0.0 ? kappa_minus : kappa_plus;
  return z;
}

NodalField levelset_smooth(const NodalField& a, double kappa_minus, double kappa_plus, double tau) {
  if (!(kappa_minus > 0.0) || !(kappa_plus > 0.0)) throw std::invalid_argument("levelset: kappa values must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("levelset: tau must be positive");
  const double norm = l2_norm(a);
  const double inv = norm < kDegenerateNorm ? 0.0 : 1.0 / norm;
  const double half_jump = 0.5 * (kappa_plus - kappa_minus);
  NodalField z(a.mesh);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double a_bar = a[i] * inv;
    z[i] = half_jump * std::tanh(tau * a_bar) + half_jump + kappa_minus;
  }
  return z;
}

NodalField lognormal_map(const NodalField& a) {
  NodalField z(a.mesh);
  for (std::size_t i = 0; i < a.size(); ++i) z[i] = std::exp(a[i]);
  return z;
}

NodalField transport(const NodalField& a, const PriorSpec& spec) {
  switch (spec.family) {
    case PriorFamily::LevelSetSharp: return levelset_sharp(a, spec.alpha[1], spec.alpha[2]);
    case PriorFamily::LevelSetSmooth: return levelset_smooth(a, spec.alpha[1], spec.alpha[2], spec.tau);
    case PriorFamily::Lognormal: return lognormal_map(a);
  }
  throw std::logic_error("unreachable prior family");
}

NodalField push_sample(const PriorSpec& spec, std::uint64_t seed, const Mesh& mesh) {
  return PriorSampler(spec, mesh).sample(seed);
}

PriorSampler::PriorSampler(PriorSpec spec, const Mesh& mesh)
    : spec_(std::move(spec)), basis_(spec_, mesh), stddev_(mode_stddevs(spec_)) {}

NodalField PriorSampler::latent_field(const LatentDraw& draw) const {
  if (draw.eps.size() != stddev_.size())
    throw std::invalid_argument("latent draw shape does not match the prior truncation");
  std::vector<double> coeffs(stddev_.size());
  for (std::size_t m = 0; m < coeffs.size(); ++m) coeffs[m] = stddev_[m] * draw.eps[m];
  return basis_.synthesize(coeffs);
}

NodalField PriorSampler::sample(const LatentDraw& draw) const { return transport(latent_field(draw), spec_); }

NodalField PriorSampler::sample(std::uint64_t seed) const { return sample(sample_latent(seed, spec_)); }

}  // namespace priorflow::randfield
