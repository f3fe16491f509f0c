#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace priorflow::cli {
namespace {

using json = nlohmann::ordered_json;

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config: " + where() + " must be an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!obj_.contains(key)) return fallback;
    return convert<T>(obj_.at(key), key);
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    used_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
    return convert<T>(obj_.at(key), key);
  }

  Reader child(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    return Reader(obj_.contains(key) ? obj_.at(key) : empty, join(key));
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return obj_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!used_.count(key)) throw ConfigError("config: unknown key '" + join(key) + "'");
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

 private:
  template <class T>
  T convert(const json& v, const std::string& key) const {
    const auto fail = [&](const char* type) {
      return ConfigError("config: '" + join(key) + "' must be " + type + ", got " + v.dump());
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw fail("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw fail("a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw fail("a number");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned()))
        throw fail(std::is_unsigned_v<T> ? "a non-negative integer" : "an integer");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw fail("an array of numbers");
      for (const auto& e : v)
        if (!e.is_number()) throw fail("an array of numbers");
      return v.get<std::vector<double>>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) throw fail("an array of integers");
      for (const auto& e : v)
        if (!e.is_number_integer()) throw fail("an array of integers");
      return v.get<std::vector<int>>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

// Truncation: an integer (same in both directions) or [J, K].
void read_modes(Reader& r, randfield::PriorSpec& spec, int dim) {
  if (!r.has("modes")) {
    r.get<int>("modes", 0);
    return;
  }
  const json& v = r.raw("modes");
  if (v.is_number_integer()) {
    spec.modes_j = spec.modes_k = v.get<int>();
  } else if (v.is_array() && v.size() == static_cast<std::size_t>(dim) && v[0].is_number_integer() &&
             (dim == 1 || v[1].is_number_integer())) {
    spec.modes_j = v[0].get<int>();
    spec.modes_k = dim == 2 ? v[1].get<int>() : spec.modes_j;
  } else {
    throw ConfigError("config: '" + r.join("modes") + "' must be an integer or an array of " + std::to_string(dim) +
                      " integers");
  }
  require(spec.modes_j >= 1 && spec.modes_k >= 1, "'" + r.join("modes") + "' must be at least 1");
}

void read_prior(Reader& r, randfield::PriorSpec& spec, int dim, bool with_alpha) {
  try {
    spec.family = randfield::family_from_string(r.get<std::string>("family", std::string(randfield::to_string(spec.family))));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: '" + r.join("family") + "': " + e.what());
  }
  if (with_alpha) spec.alpha = r.get<std::vector<double>>("alpha", spec.alpha);
  spec.beta = r.get<double>("beta", spec.beta);
  spec.tau = r.get<double>("tau", spec.tau);
  spec.sigma = r.get<double>("sigma", spec.sigma);
  read_modes(r, spec, dim);
  spec.dim = dim;
}

json modes_json(const randfield::PriorSpec& s) {
  return s.dim == 1 ? json(s.modes_j) : json::array({s.modes_j, s.modes_k});
}

json base_document() {
  return json::parse(R"({
    "seed": 0,
    "output_dir": "out",
    "mesh": {"dim": 1, "n": 65},
    "data": {"family": "levelset-sharp", "alpha": [8.0, 1.0, 2.0], "beta": 4.0, "tau": 10.0, "sigma": 1.0,
             "modes": 20, "N": 200, "d_y": 50, "gamma_std": 0.01, "f": 10.0},
    "model": {"family": "levelset-smooth", "beta": 4.0, "tau": 10.0, "sigma": 1.0, "modes": 20},
    "loss": {"N_s": 200, "n_dirs": 1000, "fd_delta": 0.001,
             "regularizer": {"enabled": false, "m_h": [], "sigma_h": 2.0}},
    "optimizer": {"T": 600, "learning_rate": 0.01, "halvings": 4, "amsgrad": false},
    "operator": {"layers": 2, "channels": 16, "modes": 8, "N_r": 20, "L": 10, "learning_rate": 0.001,
                 "halvings": 0, "amsgrad": false, "pretrain_steps": 0, "fixed_pool": false,
                 "surrogate_draws": 50},
    "solver": {"tol": 1e-10, "max_iter": 0, "jacobi": false},
    "bayes": {"y": 1.0, "gamma_std": 1.0, "n_samples": 4096, "steps": 2000, "learning_rate": 0.05, "halvings": 4},
    "convergence": {"sizes": [9, 17, 33, 65]}
  })");
}

json levelset_2d(bool desk) {
  json d = json::parse(R"({
    "mesh": {"dim": 2, "n": 100},
    "data": {"modes": [20, 20], "N": 1000},
    "model": {"modes": [20, 20]},
    "loss": {"N_s": 1000, "regularizer": {"enabled": true, "m_h": [2.302585092994046, 1.0986122886681098,
                                                                   1.0986122886681098], "sigma_h": 2.0}},
    "optimizer": {"T": 2000}
  })");
  if (desk)
    d.merge_patch(json::parse(R"({"mesh": {"n": 32}, "data": {"modes": [12, 12], "N": 200},
                                 "model": {"modes": [12, 12]}, "loss": {"N_s": 64}, "optimizer": {"T": 400}})"));
  return d;
}

json lognormal_2d(bool desk, double nu) {
  json d = json::parse(R"({
    "mesh": {"dim": 2, "n": 100},
    "data": {"family": "lognormal", "alpha": [1.5, 0.5], "sigma": 1.0, "modes": [20, 20], "N": 1000},
    "model": {"family": "lognormal", "sigma": 1.0, "modes": [20, 20]},
    "loss": {"N_s": 100, "regularizer": {"enabled": true, "m_h": [1.252762968495368, 0.0], "sigma_h": 2.0}},
    "optimizer": {"T": 2000}
  })");
  d["data"]["alpha"][0] = nu;
  if (desk)
    d.merge_patch(json::parse(R"({"mesh": {"n": 32}, "data": {"modes": [12, 12], "N": 200},
                                 "model": {"modes": [12, 12]}, "loss": {"N_s": 64}, "optimizer": {"T": 400}})"));
  return d;
}

struct Preset {
  json doc;
  std::map<std::string, double> reference;
  std::optional<double> reference_surrogate;
};

std::map<std::string, Preset> presets() {
  std::map<std::string, Preset> p;
  const std::map<std::string, double> ref1d{{"kappa_plus", 0.0056}, {"kappa_minus", 0.0028}, {"lambda", 0.0096}};
  const std::map<std::string, double> ref1d_joint{{"kappa_plus", 0.0113}, {"kappa_minus", 0.0071}, {"lambda", 0.0418}};
  const std::map<std::string, double> ref2d{{"kappa_plus", 0.0039}, {"kappa_minus", 0.0003}, {"lambda", 0.0196}};
  const std::map<std::string, double> ref2d_joint{{"kappa_plus", 0.0010}, {"kappa_minus", 0.0098}, {"lambda", 0.0319}};
  const std::map<std::string, double> reflog{{"nu", 0.0126}, {"ell", 0.0066}};
  const std::map<std::string, double> reflog_joint{{"nu", 0.0044}, {"ell", 0.0313}};

  p["darcy1d-levelset"] = {json::parse(R"({"mesh": {"n": 100}, "data": {"N": 1000}, "loss": {"N_s": 1000},
                                           "optimizer": {"T": 1000}})"),
                           ref1d, std::nullopt};
  p["darcy1d-levelset-desk"] = {json::parse(R"({"optimizer": {"learning_rate": 0.03}})"), ref1d, std::nullopt};
  p["darcy1d-levelset-joint"] = {
      json::parse(R"({"mesh": {"n": 100}, "data": {"N": 1000}, "loss": {"N_s": 1000}, "optimizer": {"T": 1000},
                      "operator": {"layers": 4, "channels": 64, "modes": 8}})"),
      ref1d_joint, 0.0040};
  p["darcy1d-levelset-joint-desk"] = {
      json::parse(R"({"optimizer": {"T": 1000, "learning_rate": 0.03},
                      "operator": {"learning_rate": 0.003, "halvings": 2, "pretrain_steps": 3000}})"),
      ref1d_joint, 0.0040};
  p["darcy2d-levelset"] = {levelset_2d(false), ref2d, std::nullopt};
  p["darcy2d-levelset-desk"] = {levelset_2d(true), ref2d, std::nullopt};
  {
    json j = levelset_2d(false);
    j.merge_patch(json::parse(R"({"loss": {"N_s": 100}, "operator": {"layers": 4, "channels": 64, "modes": 8}})"));
    p["darcy2d-levelset-joint"] = {j, ref2d_joint, 0.0073};
    p["darcy2d-levelset-joint-desk"] = {levelset_2d(true), ref2d_joint, 0.0073};
  }
  p["darcy2d-lognormal"] = {lognormal_2d(false, 1.5), reflog, std::nullopt};
  p["darcy2d-lognormal-desk"] = {lognormal_2d(true, 1.5), reflog, std::nullopt};
  {
    json j = lognormal_2d(false, 1.5);
    j.merge_patch(json::parse(R"({"optimizer": {"T": 10000}, "operator": {"layers": 4, "channels": 64, "modes": 8}})"));
    p["darcy2d-lognormal-joint"] = {j, reflog_joint, 0.00128};
    p["darcy2d-lognormal-joint-desk"] = {lognormal_2d(true, 1.5), reflog_joint, 0.00128};
  }
  {
    json j = lognormal_2d(false, 4.0);
    j.merge_patch(json::parse(R"({"optimizer": {"T": 20000, "halvings": 6},
                                  "operator": {"layers": 4, "channels": 64, "modes": 8, "amsgrad": true}})"));
    p["darcy2d-lognormal-unidentifiable"] = {j, {}, std::nullopt};
    json d = lognormal_2d(true, 4.0);
    d.merge_patch(json::parse(R"({"optimizer": {"halvings": 6}, "operator": {"amsgrad": true}})"));
    p["darcy2d-lognormal-unidentifiable-desk"] = {d, {}, std::nullopt};
  }
  p["bayes-n1"] = {json::object(), {}, std::nullopt};
  return p;
}

}  // namespace

Mode mode_from_string(const std::string& name) {
  static const std::map<std::string, Mode> modes{{"gen-data", Mode::GenData},
                                                 {"calibrate", Mode::Calibrate},
                                                 {"calibrate-joint", Mode::CalibrateJoint},
                                                 {"verify", Mode::Verify},
                                                 {"bayes-check", Mode::BayesCheck},
                                                 {"fem-convergence", Mode::FemConvergence}};
  const auto it = modes.find(name);
  if (it == modes.end()) throw ConfigError("unknown mode '" + name + "'");
  return it->second;
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::GenData: return "gen-data";
    case Mode::Calibrate: return "calibrate";
    case Mode::CalibrateJoint: return "calibrate-joint";
    case Mode::Verify: return "verify";
    case Mode::BayesCheck: return "bayes-check";
    case Mode::FemConvergence: return "fem-convergence";
  }
  return "?";
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, p] : presets()) names.push_back(name);
  return names;
}

nlohmann::ordered_json preset_document(const std::string& name) {
  const auto all = presets();
  const auto it = all.find(name);
  if (it == all.end()) throw ConfigError("config: unknown preset '" + name + "'");
  json doc = base_document();
  doc.merge_patch(it->second.doc);
  return doc;
}

ExperimentConfig parse_config(const nlohmann::ordered_json& user, Mode mode) {
  if (!user.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig cfg;
  cfg.mode = mode;
  json doc = base_document();
  if (user.contains("preset")) {
    if (!user.at("preset").is_string()) throw ConfigError("config: 'preset' must be a string");
    cfg.preset = user.at("preset").get<std::string>();
    const auto all = presets();
    const auto it = all.find(cfg.preset);
    if (it == all.end()) throw ConfigError("config: unknown preset '" + cfg.preset + "'");
    doc.merge_patch(it->second.doc);
    cfg.reference_errors = it->second.reference;
    cfg.reference_surrogate_error = it->second.reference_surrogate;
  }
  // Overrides are merged key by key; unknown keys survive the merge and are
  // caught below.
  json overrides = user;
  overrides.erase("preset");
  doc.merge_patch(overrides);

  Reader root(doc, "");
  cfg.seed = root.get<std::uint64_t>("seed", 0);
  cfg.output_dir = root.get<std::string>("output_dir", "out");
  if (auto p = root.maybe<std::string>("dataset")) cfg.dataset_path = *p;

  {
    Reader m = root.child("mesh");
    const int dim = m.get<int>("dim", 1);
    const int n = m.get<int>("n", 65);
    require(dim == 1 || dim == 2, "'mesh.dim' must be 1 or 2");
    require(n >= 3, "'mesh.n' must be at least 3");
    cfg.mesh = Mesh(dim, n);
    m.finish();
  }
  const int dim = cfg.mesh.dim;
  {
    Reader d = root.child("data");
    read_prior(d, cfg.data.prior, dim, true);
    cfg.data.N = d.get<std::size_t>("N", 200);
    cfg.data.d_y = d.get<std::size_t>("d_y", 50);
    cfg.data.gamma_std = d.get<double>("gamma_std", 0.01);
    cfg.data.f_const = d.get<double>("f", 10.0);
    d.finish();
    try {
      cfg.data.prior.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: data: ") + e.what());
    }
    require(cfg.data.N >= 1, "'data.N' must be at least 1");
    require(cfg.data.d_y >= 1 && cfg.data.d_y <= cfg.mesh.interior_count(),
            "'data.d_y' must lie in [1, interior node count]");
    require(cfg.data.gamma_std > 0.0, "'data.gamma_std' must be positive");
  }
  auto& cal = cfg.calibration;
  {
    Reader m = root.child("model");
    read_prior(m, cal.model, dim, false);
    if (auto a = m.maybe<std::vector<double>>("init_alpha")) cal.init_alpha = *a;
    m.finish();
    cal.model.alpha.assign(randfield::PriorSpec::alpha_size(cal.model.family), 1.0);
    try {
      cal.model.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: model: ") + e.what());
    }
    if (cal.init_alpha) {
      require(cal.init_alpha->size() == cal.model.alpha.size(), "'model.init_alpha' has the wrong length");
      for (double a : *cal.init_alpha) require(a > 0.0, "'model.init_alpha' entries must be positive");
    }
  }
  {
    Reader l = root.child("loss");
    cal.loss.N_s = l.get<std::size_t>("N_s", 200);
    cal.loss.n_dirs = l.get<int>("n_dirs", 1000);
    cal.loss.fd_delta = l.get<double>("fd_delta", 1e-3);
    Reader r = l.child("regularizer");
    cal.loss.reg.enabled = r.get<bool>("enabled", false);
    cal.loss.reg.m_h = r.get<std::vector<double>>("m_h", {});
    cal.loss.reg.sigma_h = r.get<double>("sigma_h", 2.0);
    r.finish();
    l.finish();
  }
  {
    Reader s = root.child("solver");
    cal.loss.solver.tol = s.get<double>("tol", 1e-10);
    cal.loss.solver.max_iter = s.get<std::size_t>("max_iter", 0);
    cal.loss.solver.jacobi = s.get<bool>("jacobi", false);
    s.finish();
    require(cal.loss.solver.tol > 0.0, "'solver.tol' must be positive");
  }
  try {
    cal.loss.validate(cal.model.alpha.size());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  {
    Reader o = root.child("optimizer");
    cal.schedule.total_steps = o.get<std::size_t>("T", 600);
    cal.schedule.base_lr = o.get<double>("learning_rate", 1e-2);
    cal.schedule.halvings = o.get<int>("halvings", 4);
    cal.adam.amsgrad = o.get<bool>("amsgrad", false);
    o.finish();
    require(cal.schedule.total_steps >= 1, "'optimizer.T' must be at least 1");
    require(cal.schedule.base_lr > 0.0, "'optimizer.learning_rate' must be positive");
    require(cal.schedule.halvings >= 0, "'optimizer.halvings' must be non-negative");
  }
  {
    Reader o = root.child("operator");
    cal.op.layers = o.get<int>("layers", 2);
    cal.op.channels = o.get<int>("channels", 16);
    cal.op.modes = o.get<int>("modes", 8);
    cal.inner.batch = o.get<std::size_t>("N_r", 20);
    cal.inner.steps = o.get<std::size_t>("L", 10);
    cal.inner.schedule.base_lr = o.get<double>("learning_rate", 1e-3);
    cal.inner.schedule.halvings = o.get<int>("halvings", 0);
    cal.inner.adam.amsgrad = o.get<bool>("amsgrad", false);
    cal.pretrain_steps = o.get<std::size_t>("pretrain_steps", 0);
    cal.inner.fixed_pool = o.get<bool>("fixed_pool", false);
    cal.surrogate_check_draws = o.get<std::size_t>("surrogate_draws", 50);
    o.finish();
    // Inner-loop decay runs over every inner step of the calibration.
    cal.inner.schedule.total_steps = cal.pretrain_steps + cal.inner.steps * cal.schedule.total_steps;
    try {
      cal.op.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: operator: ") + e.what());
    }
    require(cal.inner.batch >= 1, "'operator.N_r' must be at least 1");
    require(cal.inner.schedule.base_lr > 0.0, "'operator.learning_rate' must be positive");
  }
  {
    Reader b = root.child("bayes");
    cfg.bayes.y = b.get<double>("y", 1.0);
    cfg.bayes.gamma_std = b.get<double>("gamma_std", 1.0);
    cfg.bayes.check.n_samples = b.get<std::size_t>("n_samples", 4096);
    cfg.bayes.check.steps = b.get<std::size_t>("steps", 2000);
    cfg.bayes.check.schedule.base_lr = b.get<double>("learning_rate", 0.05);
    cfg.bayes.check.schedule.halvings = b.get<int>("halvings", 4);
    cfg.bayes.check.schedule.total_steps = cfg.bayes.check.steps;
    b.finish();
    require(cfg.bayes.gamma_std > 0.0, "'bayes.gamma_std' must be positive");
    require(cfg.bayes.check.n_samples >= 1, "'bayes.n_samples' must be at least 1");
  }
  {
    Reader c = root.child("convergence");
    cfg.convergence_sizes = c.get<std::vector<int>>("sizes", {9, 17, 33, 65});
    c.finish();
    for (int n : cfg.convergence_sizes) require(n >= 3, "'convergence.sizes' entries must be at least 3");
  }
  root.finish();
  cal.seed = cfg.seed;

  doc.erase("dataset");
  if (cfg.dataset_path) doc["dataset"] = cfg.dataset_path->string();
  if (!cfg.preset.empty()) doc["preset"] = cfg.preset;
  doc["data"]["modes"] = modes_json(cfg.data.prior);
  doc["model"]["modes"] = modes_json(cal.model);
  cfg.resolved = doc;
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path, Mode mode) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, mode);
}

}  // namespace priorflow::cli
