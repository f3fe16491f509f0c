#pragma once

// Karhunen-Loeve synthesis of cosine-basis Gaussian random fields and the
// transport maps that turn them into level-set or lognormal coefficient fields.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "priorflow/mesh.hpp"

namespace priorflow::randfield {

enum class PriorFamily { LevelSetSharp, LevelSetSmooth, Lognormal };

std::string_view to_string(PriorFamily family) noexcept;
PriorFamily family_from_string(std::string_view name);
bool is_level_set(PriorFamily family) noexcept;

/// Prior family plus its parameters.
///
/// alpha holds the learnable parameters:
///   level set: {lambda, kappa_minus, kappa_plus}
///   lognormal: {nu, ell}
/// beta, tau and sigma are fixed hyperparameters. modes_k is ignored in 1D.
struct PriorSpec {
  PriorFamily family = PriorFamily::LevelSetSmooth;
  std::vector<double> alpha;
  double beta = 4.0;
  double tau = 10.0;
  double sigma = 1.0;
  int modes_j = 20;
  int modes_k = 20;
  int dim = 1;

  std::size_t mode_count() const noexcept;
  void validate() const;

  static std::size_t alpha_size(PriorFamily family) noexcept;
  static std::vector<std::string> alpha_names(PriorFamily family);
};

/// KL coefficient std of the level-set field, (|j,k|^2 pi^2 + lambda^2)^(-beta/2).
double levelset_stddev(int j, std::optional<int> k, double lambda, double beta);

/// gamma = sigma^2 2^d pi^(d/2) Gamma(nu + d/2) / Gamma(nu).
double matern_gamma(double sigma, double nu, int dim);

/// sqrt(gamma ell^d (ell^2 |j,k|^2 pi^2 + 1)^(-nu-d/2)).
double matern_stddev(int j, std::optional<int> k, double sigma, double ell, double nu, int dim);

/// Per-mode standard deviations in latent storage order (j-major in 2D).
std::vector<double> mode_stddevs(const PriorSpec& spec);

struct LatentDraw {
  std::vector<double> eps;
  std::uint64_t seed = 0;
};

LatentDraw sample_latent(std::uint64_t seed, const PriorSpec& spec);

/// Cosine basis evaluated at the nodes of one mesh for one truncation.
/// Built once and reused across every sample of an iteration.
class SynthesisBasis {
 public:
  SynthesisBasis(const PriorSpec& spec, const Mesh& mesh);

  const Mesh& mesh() const noexcept { return mesh_; }
  int modes_j() const noexcept { return modes_j_; }
  int modes_k() const noexcept { return modes_k_; }

  /// a(x) = sum_m coeffs[m] phi_m(x); coeffs in latent storage order.
  NodalField synthesize(std::span<const double> coeffs) const;

 private:
  Mesh mesh_;
  int modes_j_;
  int modes_k_;
  // 1D: table_[node * J + j]. 2D: table_[k_or_j_node * J + mode], separable in each axis.
  std::vector<double> table_x1_;
  std::vector<double> table_x2_;
};

NodalField synthesize_grf(const LatentDraw& draw, const PriorSpec& spec, const Mesh& mesh);
NodalField synthesize_grf(const LatentDraw& draw, const PriorSpec& spec, const SynthesisBasis& basis);

/// Trapezoidal approximation of the L2(D) norm.
double l2_norm(const NodalField& field);

NodalField levelset_sharp(const NodalField& a, double kappa_minus, double kappa_plus);
NodalField levelset_smooth(const NodalField& a, double kappa_minus, double kappa_plus, double tau);
NodalField lognormal_map(const NodalField& a);

/// Applies the family map of spec to a synthesized field.
NodalField transport(const NodalField& a, const PriorSpec& spec);

/// sample_latent -> synthesize_grf -> family map.
NodalField push_sample(const PriorSpec& spec, std::uint64_t seed, const Mesh& mesh);

/// push_sample with the synthesis table and mode spectrum cached.
class PriorSampler {
 public:
  PriorSampler(PriorSpec spec, const Mesh& mesh);

  const PriorSpec& spec() const noexcept { return spec_; }
  const Mesh& mesh() const noexcept { return basis_.mesh(); }

  NodalField latent_field(const LatentDraw& draw) const;
  NodalField sample(const LatentDraw& draw) const;
  NodalField sample(std::uint64_t seed) const;

 private:
  PriorSpec spec_;
  SynthesisBasis basis_;
  std::vector<double> stddev_;
};

}  // namespace priorflow::randfield
