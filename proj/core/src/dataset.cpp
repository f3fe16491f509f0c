#include "priorflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "priorflow/parallel.hpp"
#include "priorflow/rng.hpp"

namespace priorflow {

using nlohmann::ordered_json;

void Dataset::validate() const {
  if (N == 0 || d_y == 0) throw std::invalid_argument("dataset: N and d_y must be positive");
  if (obs_nodes.size() != d_y) throw std::invalid_argument("dataset: obs_nodes length differs from d_y");
  if (observations.size() != N * d_y) throw std::invalid_argument("dataset: observation matrix is not N x d_y");
  if (!(gamma_std > 0.0)) throw std::invalid_argument("dataset: gamma_std must be positive");
  for (std::size_t node : obs_nodes)
    if (node >= mesh.node_count() || mesh.is_boundary(node))
      throw std::invalid_argument("dataset: observation node " + std::to_string(node) + " is not an interior node");
  for (double v : observations)
    if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite observation");
}

std::vector<std::size_t> choose_observation_nodes(const Mesh& mesh, std::size_t d_y, std::uint64_t seed) {
  std::vector<std::size_t> pool = mesh.interior_nodes();
  if (d_y == 0 || d_y > pool.size())
    throw std::invalid_argument("cannot place " + std::to_string(d_y) + " observations on " +
                                std::to_string(pool.size()) + " interior nodes");
  Rng rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < d_y; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(d_y);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Dataset generate_dataset(const randfield::PriorSpec& true_spec, std::size_t N, std::size_t d_y, double gamma_std,
                         double f_const, const Mesh& mesh, std::uint64_t master_seed,
                         const fem::SolverOptions& solver) {
  true_spec.validate();
  if (N == 0) throw std::invalid_argument("generate_dataset: N must be at least 1");
  if (gamma_std < 0.0) throw std::invalid_argument("generate_dataset: gamma_std must be nonnegative");

  Dataset ds;
  ds.true_prior = true_spec;
  ds.N = N;
  ds.d_y = d_y;
  ds.gamma_std = gamma_std;
  ds.f_const = f_const;
  ds.mesh = mesh;
  ds.seeds.master = master_seed;
  ds.seeds.latent = derive_seed(master_seed, Stream::Latent);
  ds.seeds.noise = derive_seed(master_seed, Stream::Noise);
  ds.seeds.obs_nodes = derive_seed(master_seed, Stream::ObsNodes);
  ds.obs_nodes = choose_observation_nodes(mesh, d_y, ds.seeds.obs_nodes);
  ds.observations.assign(N * d_y, 0.0);

  const randfield::PriorSampler sampler(true_spec, mesh);
  const NodalField f(mesh, f_const);
  parallel_for(N, [&](std::size_t n) {
    const NodalField z = sampler.sample(derive_seed(ds.seeds.latent, n));
    const std::vector<double> y =
        fem::simulate_observation(z, f, ds.obs_nodes, gamma_std, derive_seed(ds.seeds.noise, n), solver);
    std::copy(y.begin(), y.end(), ds.observations.begin() + static_cast<std::ptrdiff_t>(n * d_y));
  });
  return ds;
}

ordered_json to_json(const Dataset& ds) {
  ordered_json doc;
  doc["version"] = ds.version;
  doc["family"] = std::string(randfield::to_string(ds.true_prior.family));
  doc["true_alpha"] = ds.true_prior.alpha;
  ordered_json fixed;
  fixed["beta"] = ds.true_prior.beta;
  fixed["tau"] = ds.true_prior.tau;
  fixed["sigma"] = ds.true_prior.sigma;
  fixed["modes"] = ds.mesh.dim == 1 ? std::vector<int>{ds.true_prior.modes_j}
                                    : std::vector<int>{ds.true_prior.modes_j, ds.true_prior.modes_k};
  doc["fixed_params"] = fixed;
  doc["N"] = ds.N;
  doc["d_y"] = ds.d_y;
  doc["gamma_std"] = ds.gamma_std;
  doc["f_const"] = ds.f_const;
  doc["mesh"] = ordered_json{{"dim", ds.mesh.dim}, {"n", ds.mesh.n}};
  doc["obs_nodes"] = ds.obs_nodes;
  doc["seeds"] = ordered_json{{"master", ds.seeds.master},
                              {"latent", ds.seeds.latent},
                              {"noise", ds.seeds.noise},
                              {"obs_nodes", ds.seeds.obs_nodes}};
  ordered_json rows = ordered_json::array();
  for (std::size_t n = 0; n < ds.N; ++n) {
    auto r = ds.row(n);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  doc["observations"] = std::move(rows);
  return doc;
}

Dataset dataset_from_json(const ordered_json& doc) {
  Dataset ds;
  try {
    ds.version = doc.at("version").get<int>();
    if (ds.version != 1) throw std::invalid_argument("unsupported dataset version " + std::to_string(ds.version));
    const int dim = doc.at("mesh").at("dim").get<int>();
    ds.mesh = Mesh(dim, doc.at("mesh").at("n").get<int>());
    auto& prior = ds.true_prior;
    prior.family = randfield::family_from_string(doc.at("family").get<std::string>());
    prior.alpha = doc.at("true_alpha").get<std::vector<double>>();
    const auto& fixed = doc.at("fixed_params");
    prior.beta = fixed.at("beta").get<double>();
    prior.tau = fixed.at("tau").get<double>();
    prior.sigma = fixed.at("sigma").get<double>();
    const auto modes = fixed.at("modes").get<std::vector<int>>();
    if (modes.size() != static_cast<std::size_t>(dim)) throw std::invalid_argument("fixed_params.modes must have dim entries");
    prior.dim = dim;
    prior.modes_j = modes[0];
    prior.modes_k = dim == 2 ? modes[1] : prior.modes_k;
    ds.N = doc.at("N").get<std::size_t>();
    ds.d_y = doc.at("d_y").get<std::size_t>();
    ds.gamma_std = doc.at("gamma_std").get<double>();
    ds.f_const = doc.at("f_const").get<double>();
    ds.obs_nodes = doc.at("obs_nodes").get<std::vector<std::size_t>>();
    const auto& seeds = doc.at("seeds");
    ds.seeds = {seeds.at("master").get<std::uint64_t>(), seeds.at("latent").get<std::uint64_t>(),
                seeds.at("noise").get<std::uint64_t>(), seeds.at("obs_nodes").get<std::uint64_t>()};
    const auto& rows = doc.at("observations");
    if (rows.size() != ds.N) throw std::invalid_argument("observations must have N rows");
    ds.observations.reserve(ds.N * ds.d_y);
    for (const auto& row : rows) {
      const auto values = row.get<std::vector<double>>();
      if (values.size() != ds.d_y) throw std::invalid_argument("observation row length differs from d_y");
      ds.observations.insert(ds.observations.end(), values.begin(), values.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed dataset document: ") + e.what());
  }
  ds.validate();
  return ds;
}

std::string dump_json(const ordered_json& doc) { return doc.dump(2) + "\n"; }

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset to " + path.string());
  out << dump_json(to_json(ds));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return dataset_from_json(ordered_json::parse(in));
}

}  // namespace priorflow
