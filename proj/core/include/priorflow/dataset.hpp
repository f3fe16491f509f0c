#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorflow/fem.hpp"
#include "priorflow/mesh.hpp"
#include "priorflow/randfield.hpp"

namespace priorflow {

/// Seeds a dataset was generated from. Row n used latent seed
/// derive_seed(latent, n) and noise seed derive_seed(noise, n).
struct DatasetSeeds {
  std::uint64_t master = 0;
  std::uint64_t latent = 0;
  std::uint64_t noise = 0;
  std::uint64_t obs_nodes = 0;
};

/// N noisy observation vectors of length d_y taken at one shared set of
/// interior nodes, plus everything needed to regenerate them.
struct Dataset {
  int version = 1;
  randfield::PriorSpec true_prior;
  std::size_t N = 0;
  std::size_t d_y = 0;
  double gamma_std = 0.01;
  double f_const = 10.0;
  Mesh mesh;
  std::vector<std::size_t> obs_nodes;
  DatasetSeeds seeds;
  std::vector<double> observations;  // N x d_y, row-major

  std::span<const double> row(std::size_t n) const { return {observations.data() + n * d_y, d_y}; }
  void validate() const;
};

Dataset generate_dataset(const randfield::PriorSpec& true_spec, std::size_t N, std::size_t d_y, double gamma_std,
                         double f_const, const Mesh& mesh, std::uint64_t master_seed,
                         const fem::SolverOptions& solver = {});

/// Uniform draw without replacement of d_y interior nodes, returned sorted.
std::vector<std::size_t> choose_observation_nodes(const Mesh& mesh, std::size_t d_y, std::uint64_t seed);

nlohmann::ordered_json to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::ordered_json& doc);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Serialized form used on disk (stable field order, shortest round-trip doubles).
std::string dump_json(const nlohmann::ordered_json& doc);

}  // namespace priorflow
