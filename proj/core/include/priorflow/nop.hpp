#pragma once

// Fourier neural operator z -> u_hat on a structured mesh, trained only
// through the FEM weak-form residual of its own output.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorflow/mesh.hpp"
#include "priorflow/optim.hpp"
#include "priorflow/randfield.hpp"
#include "priorflow/tape.hpp"

namespace priorflow::nop {

struct OperatorConfig {
  int layers = 2;
  int channels = 16;
  int modes = 8;

  void validate() const;
};

/// Weights of the operator, stored as tensors in a fixed order:
/// lift.w (C,F), lift.b (C), then per layer {w (C,C), b (C), spectral (C,C,R,K,2)},
/// then proj.w (1,C), proj.b (1). F = 1 + mesh.dim input features (z and coordinates).
struct OperatorParams {
  OperatorConfig config;
  Mesh mesh;
  std::vector<std::string> names;
  std::vector<tape::Tensor> tensors;

  static OperatorParams zeros(const OperatorConfig& config, const Mesh& mesh);
  /// Uniform(+-1/sqrt(fan_in)) pointwise weights; spectral weights Uniform(+-1/(C*M)).
  static OperatorParams init(const OperatorConfig& config, const Mesh& mesh, std::uint64_t seed);

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

/// Input features, boundary mask and spectral plan for one (config, mesh).
struct OperatorGeometry {
  Mesh mesh;
  std::shared_ptr<const tape::SpectralPlan> plan;
  std::shared_ptr<const std::vector<double>> mask;
  std::vector<double> coords;  // (dim, G)

  OperatorGeometry(const OperatorConfig& config, const Mesh& mesh);
};

/// Records the forward pass on `t`; returns u_hat as a (1, G) node.
tape::Var build_forward(tape::Tape& t, std::span<const tape::Var> params, const OperatorGeometry& geo,
                        const NodalField& z);

NodalField fno_forward(const NodalField& z, const OperatorParams& phi);
NodalField fno_forward(const NodalField& z, const OperatorParams& phi, const OperatorGeometry& geo);

/// Mean over `draws` prior samples of ||u_hat - u|| / ||u|| (trapezoidal L2),
/// u from solve_darcy. Latent seeds derive_seed(seed, i).
double surrogate_relative_error(const OperatorParams& phi, const randfield::PriorSampler& sampler, const NodalField& f,
                                std::size_t draws, std::uint64_t seed);

struct ResidualBatchLoss {
  double loss = 0.0;                 // mean of per_sample
  std::vector<double> per_sample;    // squared 2-norm of the interior residual
  std::vector<double> grad;          // d loss / d phi, flattened; empty unless requested
};

/// Squared residual norm of (z, fno_forward(z)) as a tape node.
tape::Var build_residual_loss(tape::Tape& t, std::span<const tape::Var> params, const OperatorGeometry& geo,
                              const NodalField& z, const NodalField& f);

ResidualBatchLoss residual_loss_J4(const OperatorParams& phi, std::span<const NodalField> z_batch,
                                   const NodalField& f, bool with_grad = true);

struct InnerLoopConfig {
  std::size_t steps = 10;       // L
  std::size_t batch = 20;       // N_r
  bool fixed_pool = false;      // reuse one batch for every step
  optim::LrSchedule schedule{1e-3, 0, 1};
  optim::AdamConfig adam{};
};

struct InnerLoopResult {
  std::vector<double> losses;
};

/// L Adam updates of phi on J4 over samples of `sampler`. opt must hold
/// phi.flatten() as its iterate; phi is kept in sync. Step l draws its batch
/// from latent seeds derive_seed(derive_seed(seed, Stream::Inner, l), Stream::Latent, i).
InnerLoopResult inner_loop(OperatorParams& phi, optim::OptimState& opt, const randfield::PriorSampler& sampler,
                           const NodalField& f, const InnerLoopConfig& config, std::uint64_t seed);

nlohmann::ordered_json operator_sidecar(const OperatorParams& phi);
/// Raw little-endian float64 blob plus JSON sidecar describing the tensors.
void save_operator(const OperatorParams& phi, const std::filesystem::path& blob, const std::filesystem::path& sidecar);
OperatorParams load_operator(const std::filesystem::path& blob, const std::filesystem::path& sidecar);

}  // namespace priorflow::nop
