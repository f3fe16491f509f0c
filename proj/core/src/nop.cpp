#include "priorflow/nop.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "priorflow/dataset.hpp"
#include "priorflow/fem.hpp"
#include "priorflow/parallel.hpp"
#include "priorflow/rng.hpp"

namespace priorflow::nop {
namespace {

using tape::Shape;
using tape::Tensor;
using tape::Var;

struct Layout {
  std::size_t C, F, R, K;
};

Layout layout_for(const OperatorConfig& cfg, const Mesh& mesh) {
  const std::size_t n2 = static_cast<std::size_t>(mesh.n);
  const std::size_t n1 = mesh.dim == 2 ? n2 : 1;
  const tape::SpectralPlan plan(n1, n2, static_cast<std::size_t>(cfg.modes));
  return {static_cast<std::size_t>(cfg.channels), static_cast<std::size_t>(1 + mesh.dim), plan.rows(), plan.cols()};
}

std::vector<std::pair<std::string, Shape>> param_shapes(const OperatorConfig& cfg, const Mesh& mesh) {
  const Layout l = layout_for(cfg, mesh);
  std::vector<std::pair<std::string, Shape>> s;
  s.push_back({"lift.w", {l.C, l.F}});
  s.push_back({"lift.b", {l.C}});
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    s.push_back({p + "w", {l.C, l.C}});
    s.push_back({p + "b", {l.C}});
    s.push_back({p + "spectral", {l.C, l.C, l.R, l.K, 2}});
  }
  s.push_back({"proj.w", {1, l.C}});
  s.push_back({"proj.b", {1}});
  return s;
}

std::uint64_t to_little(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | ((bits >> (8 * i)) & 0xffu);
    return out;
  }
  return bits;
}

void write_le(std::ostream& os, const std::vector<double>& values) {
  for (double v : values) {
    const auto bits = to_little(std::bit_cast<std::uint64_t>(v));
    os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

}  // namespace

void OperatorConfig::validate() const {
  if (layers < 0) throw std::invalid_argument("operator layers must be non-negative");
  if (channels < 1) throw std::invalid_argument("operator channels must be at least 1");
  if (modes < 1) throw std::invalid_argument("operator modes must be at least 1");
}

OperatorParams OperatorParams::zeros(const OperatorConfig& config, const Mesh& mesh) {
  config.validate();
  OperatorParams p;
  p.config = config;
  p.mesh = mesh;
  for (auto& [name, shape] : param_shapes(config, mesh)) {
    p.names.push_back(name);
    p.tensors.emplace_back(shape, 0.0);
  }
  return p;
}

OperatorParams OperatorParams::init(const OperatorConfig& config, const Mesh& mesh, std::uint64_t seed) {
  OperatorParams p = zeros(config, mesh);
  Rng rng(derive_seed(seed, Stream::Operator));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double spectral_scale = 1.0 / (static_cast<double>(config.channels) * config.modes);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    Tensor& t = p.tensors[i];
    const std::string& name = p.names[i];
    double scale;
    if (name.ends_with("spectral"))
      scale = spectral_scale;
    else if (t.rank() == 2)
      scale = 1.0 / std::sqrt(static_cast<double>(t.dim(1)));
    else  // bias: fan-in of the matching weight
      scale = 1.0 / std::sqrt(static_cast<double>(p.tensors[i - 1].dim(1)));
    for (auto& v : t.data) v = scale * unit(rng);
  }
  return p;
}

std::size_t OperatorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

std::vector<double> OperatorParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& t : tensors) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

void OperatorParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("OperatorParams::assign: expected " + std::to_string(parameter_count()) +
                                " values, got " + std::to_string(flat.size()));
  std::size_t off = 0;
  for (auto& t : tensors) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off), flat.begin() + static_cast<std::ptrdiff_t>(off + t.size()),
              t.data.begin());
    off += t.size();
  }
}

OperatorGeometry::OperatorGeometry(const OperatorConfig& config, const Mesh& m) : mesh(m) {
  config.validate();
  const auto n2 = static_cast<std::size_t>(mesh.n);
  const std::size_t n1 = mesh.dim == 2 ? n2 : 1;
  plan = std::make_shared<tape::SpectralPlan>(n1, n2, static_cast<std::size_t>(config.modes));
  const std::size_t G = mesh.node_count();
  auto mk = std::make_shared<std::vector<double>>(G);
  coords.resize(static_cast<std::size_t>(mesh.dim) * G);
  for (std::size_t p = 0; p < G; ++p) {
    const auto x = mesh.coords(p);
    coords[p] = x[0];
    if (mesh.dim == 2) coords[G + p] = x[1];
    double v = std::sin(std::numbers::pi * x[0]);
    if (mesh.dim == 2) v *= std::sin(std::numbers::pi * x[1]);
    (*mk)[p] = mesh.is_boundary(p) ? 0.0 : v;
  }
  mask = std::move(mk);
}

Var build_forward(tape::Tape& t, std::span<const Var> params, const OperatorGeometry& geo, const NodalField& z) {
  if (!(z.mesh == geo.mesh)) throw std::invalid_argument("fno_forward: input field is on a different mesh");
  const std::size_t G = geo.mesh.node_count();
  const std::size_t F = 1 + static_cast<std::size_t>(geo.mesh.dim);
  Tensor feats({F, G});
  std::copy(z.values.begin(), z.values.end(), feats.data.begin());
  std::copy(geo.coords.begin(), geo.coords.end(), feats.data.begin() + static_cast<std::ptrdiff_t>(G));
  const std::size_t layers = (params.size() - 4) / 3;
  if (params.size() != 4 + 3 * layers) throw std::invalid_argument("fno_forward: unexpected parameter count");

  Var v = add_channel_bias(channel_contract(params[0], t.constant(std::move(feats))), params[1]);
  for (std::size_t l = 0; l < layers; ++l) {
    const Var w = params[2 + 3 * l], b = params[3 + 3 * l], spec = params[4 + 3 * l];
    const Var local = add_channel_bias(channel_contract(w, v), b);
    const Var global = spectral_inverse(mode_multiply(spec, spectral_forward(v, geo.plan)), geo.plan);
    v = silu(add(local, global));
  }
  const Var out = add_channel_bias(channel_contract(params[params.size() - 2], v), params.back());
  return mask_multiply(out, geo.mask);
}

NodalField fno_forward(const NodalField& z, const OperatorParams& phi) {
  return fno_forward(z, phi, OperatorGeometry(phi.config, phi.mesh));
}

NodalField fno_forward(const NodalField& z, const OperatorParams& phi, const OperatorGeometry& geo) {
  if (!(z.mesh == phi.mesh)) throw std::invalid_argument("fno_forward: operator was configured for another mesh");
  tape::Tape t;
  std::vector<Var> leaves;
  for (const auto& p : phi.tensors) leaves.push_back(t.constant(p));
  const Var u = build_forward(t, leaves, geo, z);
  return NodalField(phi.mesh, u.value().data);
}

double surrogate_relative_error(const OperatorParams& phi, const randfield::PriorSampler& sampler, const NodalField& f,
                                std::size_t draws, std::uint64_t seed) {
  if (draws < 1) throw std::invalid_argument("surrogate_relative_error: draws must be at least 1");
  const OperatorGeometry geo(phi.config, phi.mesh);
  std::vector<double> err(draws);
  parallel_for(draws, [&](std::size_t i) {
    const NodalField z = sampler.sample(derive_seed(seed, i));
    const NodalField u = fem::solve_darcy(z, f);
    NodalField diff = fno_forward(z, phi, geo);
    for (std::size_t p = 0; p < diff.size(); ++p) diff[p] -= u[p];
    err[i] = randfield::l2_norm(diff) / randfield::l2_norm(u);
  });
  double acc = 0.0;
  for (double e : err) acc += e;
  return acc / static_cast<double>(draws);
}

Var build_residual_loss(tape::Tape& t, std::span<const Var> params, const OperatorGeometry& geo, const NodalField& z,
                        const NodalField& f) {
  if (!(f.mesh == geo.mesh)) throw std::invalid_argument("residual_loss_J4: forcing is on a different mesh");
  const Var u = build_forward(t, params, geo, z);
  const std::size_t d_o = geo.mesh.interior_count();
  const Var ku = linear_map(
      u, {d_o}, [&z](std::span<const double> x, std::span<double> y) { fem::stiffness_action(z, x, y); },
      [z](std::span<const double> g, std::span<double> gx) { fem::stiffness_transpose_action(z, g, gx); },
      "stiffness");
  const Var r = sub(t.constant(Tensor({d_o}, fem::load_vector(f))), ku);
  return scale(mean_of_squares(r), static_cast<double>(d_o));
}

ResidualBatchLoss residual_loss_J4(const OperatorParams& phi, std::span<const NodalField> z_batch, const NodalField& f,
                                   bool with_grad) {
  if (z_batch.empty()) throw std::invalid_argument("residual_loss_J4: empty batch");
  const OperatorGeometry geo(phi.config, phi.mesh);
  const std::size_t B = z_batch.size();
  const std::size_t P = phi.parameter_count();
  ResidualBatchLoss out;
  out.per_sample.resize(B);
  std::vector<std::vector<double>> grads(with_grad ? B : 0);
  parallel_for(B, [&](std::size_t i) {
    tape::Tape t;
    std::vector<Var> leaves;
    for (const auto& p : phi.tensors) leaves.push_back(t.leaf(p, with_grad));
    const Var loss = build_residual_loss(t, leaves, geo, z_batch[i], f);
    out.per_sample[i] = loss.value().data[0];
    if (!with_grad) return;
    t.backward(loss);
    auto& g = grads[i];
    g.reserve(P);
    for (Var v : leaves) {
      const auto& d = t.grad(v).data;
      g.insert(g.end(), d.begin(), d.end());
    }
  });
  double acc = 0.0;
  for (double v : out.per_sample) acc += v;
  out.loss = acc / static_cast<double>(B);
  if (with_grad) {
    out.grad.assign(P, 0.0);
    for (const auto& g : grads)
      for (std::size_t k = 0; k < P; ++k) out.grad[k] += g[k];
    for (auto& v : out.grad) v /= static_cast<double>(B);
  }
  return out;
}

InnerLoopResult inner_loop(OperatorParams& phi, optim::OptimState& opt, const randfield::PriorSampler& sampler,
                           const NodalField& f, const InnerLoopConfig& config, std::uint64_t seed) {
  if (config.batch < 1) throw std::invalid_argument("inner_loop: batch must be at least 1");
  if (opt.iterate.size() != phi.parameter_count())
    throw std::invalid_argument("inner_loop: optimizer state does not match the operator");
  InnerLoopResult res;
  std::vector<NodalField> zs(config.batch);
  for (std::size_t l = 0; l < config.steps; ++l) {
    if (l == 0 || !config.fixed_pool) {
      const std::uint64_t step_seed = derive_seed(seed, Stream::Inner, config.fixed_pool ? 0 : l);
      parallel_for(config.batch, [&](std::size_t i) { zs[i] = sampler.sample(derive_seed(step_seed, Stream::Latent, i)); });
    }
    const auto loss = residual_loss_J4(phi, zs, f, true);
    if (!std::isfinite(loss.loss))
      throw std::runtime_error("inner_loop: non-finite residual loss at step " + std::to_string(l));
    res.losses.push_back(loss.loss);
    optim::adam_step(opt, loss.grad);
    phi.assign(opt.iterate);
  }
  return res;
}

nlohmann::ordered_json operator_sidecar(const OperatorParams& phi) {
  nlohmann::ordered_json doc;
  doc["format"] = "float64-le";
  doc["config"] = {{"layers", phi.config.layers}, {"channels", phi.config.channels}, {"modes", phi.config.modes}};
  doc["mesh"] = {{"dim", phi.mesh.dim}, {"n", phi.mesh.n}};
  doc["parameter_count"] = phi.parameter_count();
  auto tensors = nlohmann::ordered_json::array();
  std::size_t off = 0;
  for (std::size_t i = 0; i < phi.tensors.size(); ++i) {
    tensors.push_back({{"name", phi.names[i]}, {"shape", phi.tensors[i].shape}, {"offset", off}});
    off += phi.tensors[i].size();
  }
  doc["tensors"] = std::move(tensors);
  return doc;
}

void save_operator(const OperatorParams& phi, const std::filesystem::path& blob, const std::filesystem::path& sidecar) {
  std::ofstream os(blob, std::ios::binary);
  if (!os) throw std::runtime_error("save_operator: cannot open " + blob.string());
  write_le(os, phi.flatten());
  if (!os) throw std::runtime_error("save_operator: write failed for " + blob.string());
  std::ofstream js(sidecar);
  if (!js) throw std::runtime_error("save_operator: cannot open " + sidecar.string());
  js << dump_json(operator_sidecar(phi));
}

OperatorParams load_operator(const std::filesystem::path& blob, const std::filesystem::path& sidecar) {
  std::ifstream js(sidecar);
  if (!js) throw std::runtime_error("load_operator: cannot open " + sidecar.string());
  const auto doc = nlohmann::ordered_json::parse(js);
  if (doc.at("format") != "float64-le") throw std::invalid_argument("load_operator: unsupported blob format");
  OperatorConfig cfg{doc.at("config").at("layers").get<int>(), doc.at("config").at("channels").get<int>(),
                     doc.at("config").at("modes").get<int>()};
  const Mesh mesh(doc.at("mesh").at("dim").get<int>(), doc.at("mesh").at("n").get<int>());
  OperatorParams phi = OperatorParams::zeros(cfg, mesh);
  const std::size_t P = phi.parameter_count();
  if (doc.at("parameter_count").get<std::size_t>() != P)
    throw std::invalid_argument("load_operator: sidecar parameter count disagrees with its config");
  std::ifstream is(blob, std::ios::binary);
  if (!is) throw std::runtime_error("load_operator: cannot open " + blob.string());
  std::vector<double> flat(P);
  for (auto& v : flat) {
    std::uint64_t bits = 0;
    if (!is.read(reinterpret_cast<char*>(&bits), sizeof bits))
      throw std::invalid_argument("load_operator: blob is shorter than the sidecar declares");
    v = std::bit_cast<double>(to_little(bits));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::invalid_argument("load_operator: blob has trailing bytes");
  phi.assign(flat);
  return phi;
}

}  // namespace priorflow::nop
