#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "priorflow/calib.hpp"
#include "priorflow/checks/oracles.hpp"
#include "priorflow/checks/suites.hpp"
#include "priorflow/dataset.hpp"
#include "priorflow/nop.hpp"

namespace priorflow::cli {
namespace {

using json = nlohmann::ordered_json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

Dataset obtain_dataset(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.dataset_path) {
    Dataset ds = load_dataset(*cfg.dataset_path);
    if (!(ds.mesh == cfg.mesh))
      throw std::invalid_argument("dataset mesh (dim " + std::to_string(ds.mesh.dim) + ", n " +
                                  std::to_string(ds.mesh.n) + ") differs from the configured mesh");
    log << "loaded dataset " << cfg.dataset_path->string() << " (N=" << ds.N << ", d_y=" << ds.d_y << ")\n";
    return ds;
  }
  log << "generating dataset (N=" << cfg.data.N << ", d_y=" << cfg.data.d_y << ", seed=" << cfg.seed << ")\n";
  Dataset ds = generate_dataset(cfg.data.prior, cfg.data.N, cfg.data.d_y, cfg.data.gamma_std, cfg.data.f_const,
                                cfg.mesh, cfg.seed, cfg.calibration.loss.solver);
  save_dataset(ds, cfg.output_dir / "dataset.json");
  return ds;
}

calib::ProgressFn progress_printer(std::ostream& log, std::size_t total) {
  const std::size_t every = std::max<std::size_t>(1, total / 20);
  return [&log, every, total](const TraceRecord& r) {
    if (r.iter % every != 0 && r.iter + 1 != total) return;
    log << "iter " << std::setw(6) << r.iter << "  loss " << std::setprecision(6) << r.loss << "  alpha";
    for (double a : r.alpha) log << ' ' << a;
    log << '\n';
  };
}

void emit_run(const RunTrace& trace, const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
  write_text(cfg.output_dir / "trace.csv", trace_csv(trace));
  write_text(cfg.output_dir / "summary.json", dump_json(report(trace, cfg)));
  if (opts.plots) write_plots(trace, cfg.output_dir);
  const auto names = randfield::PriorSpec::alpha_names(trace.family);
  log << "final alpha:";
  for (std::size_t i = 0; i < names.size(); ++i) log << ' ' << names[i] << '=' << trace.final_alpha[i];
  log << '\n';
  if (trace.true_alpha) {
    const auto errs = relative_errors(trace.final_alpha, *trace.true_alpha);
    log << "relative error:";
    for (std::size_t i = 0; i < names.size(); ++i) log << ' ' << names[i] << '=' << 100.0 * errs[i] << '%';
    log << '\n';
  }
  if (trace.surrogate_error) log << "surrogate relative L2 error: " << 100.0 * *trace.surrogate_error << "%\n";
  log << "wrote " << (cfg.output_dir / "summary.json").string() << '\n';
}

int run_verify(const ExperimentConfig& cfg, std::ostream& log) {
  const auto results = checks::run_all();
  json doc = json::array();
  std::size_t passed = 0;
  for (const auto& r : results) {
    passed += r.passed;
    log << (r.passed ? "PASS " : "FAIL ") << r.name << "  value=" << r.value;
    if (!r.detail.empty()) log << "  (" << r.detail << ")";
    log << '\n';
    doc.push_back({{"name", r.name}, {"passed", r.passed}, {"value", r.value}, {"tolerance", r.tolerance},
                   {"detail", r.detail}});
  }
  log << passed << "/" << results.size() << " checks passed\n";
  write_text(cfg.output_dir / "verify.json", dump_json(doc));
  return passed == results.size() ? 0 : 1;
}

int run_bayes(const ExperimentConfig& cfg, std::ostream& log) {
  const auto r = bayes::bayes_check(cfg.bayes.y, cfg.bayes.gamma_std, cfg.seed, cfg.bayes.check);
  log << "recovered m=" << r.m << " s=" << r.s << "\nanalytic  m=" << r.m_hat << " s=" << r.s_hat << '\n';
  json doc;
  doc["y"] = cfg.bayes.y;
  doc["gamma_std"] = cfg.bayes.gamma_std;
  doc["recovered"] = {{"m", r.m}, {"s", r.s}};
  doc["analytic"] = {{"m", r.m_hat}, {"s", r.s_hat}};
  doc["relative_errors"] = {{"m", r.m_hat != 0.0 ? std::abs(r.m - r.m_hat) / std::abs(r.m_hat) : std::abs(r.m)},
                            {"s", std::abs(r.s - r.s_hat) / r.s_hat}};
  doc["objective"] = r.objective;
  doc["seed"] = cfg.seed;
  write_text(cfg.output_dir / "bayes.json", dump_json(doc));
  return 0;
}

int run_convergence(const ExperimentConfig& cfg, std::ostream& log) {
  const auto rows = checks::manufactured_convergence_2d(cfg.convergence_sizes);
  log << std::setw(6) << "n" << std::setw(14) << "h" << std::setw(16) << "max error" << std::setw(10) << "ratio\n";
  json doc = json::array();
  for (const auto& r : rows) {
    log << std::setw(6) << r.n << std::setw(14) << r.h << std::setw(16) << r.max_error << std::setw(10);
    if (r.ratio > 0.0)
      log << r.ratio;
    else
      log << "-";
    log << '\n';
    doc.push_back({{"n", r.n}, {"h", r.h}, {"max_error", r.max_error}, {"ratio", r.ratio}});
  }
  write_text(cfg.output_dir / "convergence.json", dump_json(doc));
  return 0;
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void line_plot(const std::filesystem::path& path, const std::string& title, const std::vector<double>& ys,
               std::optional<double> reference, bool log_y) {
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  auto tr = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double lo = INFINITY, hi = -INFINITY;
  for (double y : ys) {
    lo = std::min(lo, tr(y));
    hi = std::max(hi, tr(y));
  }
  if (reference) {
    lo = std::min(lo, tr(*reference));
    hi = std::max(hi, tr(*reference));
  }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double n = std::max<double>(1.0, static_cast<double>(ys.size()) - 1.0);
  auto px = [&](double i) { return L + (W - L - R) * i / n; };
  auto py = [&](double v) { return T + (H - T - B) * (1.0 - (tr(v) - lo) / (hi - lo)); };
  std::ostringstream s;
  s << std::setprecision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << svg_escape(title) << "</text>\n";
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const double yy = T + (H - T - B) * (1.0 - k / 4.0);
    s << "<text x=\"" << L - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << (log_y ? std::pow(10.0, v) : v) << "</text>\n";
  }
  s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"12\">iteration (0.." << ys.size() << ")</text>\n";
  if (reference)
    s << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(*reference) << "\" y2=\"" << py(*reference)
      << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < ys.size(); ++i) s << px(static_cast<double>(i)) << ',' << py(ys[i]) << ' ';
  s << "\"/>\n</svg>\n";
  write_text(path, s.str());
}

}  // namespace

json report(const RunTrace& trace, const ExperimentConfig& cfg) {
  json doc = summary_json(trace, cfg.resolved);
  doc["mode"] = to_string(cfg.mode);
  if (!cfg.reference_errors.empty() && trace.true_alpha) {
    const auto names = randfield::PriorSpec::alpha_names(trace.family);
    const auto errs = relative_errors(trace.final_alpha, *trace.true_alpha);
    json rows = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto it = cfg.reference_errors.find(names[i]);
      if (it == cfg.reference_errors.end()) continue;
      rows.push_back({{"parameter", names[i]}, {"relative_error", errs[i]}, {"full_scale_reference", it->second}});
    }
    doc["comparison"] = rows;
    if (cfg.reference_surrogate_error && trace.surrogate_error)
      doc["surrogate_comparison"] = {{"relative_error", *trace.surrogate_error},
                                     {"full_scale_reference", *cfg.reference_surrogate_error}};
  }
  return doc;
}

void write_plots(const RunTrace& trace, const std::filesystem::path& dir) {
  const auto names = randfield::PriorSpec::alpha_names(trace.family);
  std::vector<double> loss;
  for (const auto& r : trace.records) loss.push_back(r.loss);
  line_plot(dir / "loss.svg", "loss", loss, std::nullopt, true);
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<double> ys;
    for (const auto& r : trace.records) ys.push_back(r.alpha[i]);
    std::optional<double> ref;
    if (trace.true_alpha) ref = (*trace.true_alpha)[i];
    line_plot(dir / ("alpha_" + names[i] + ".svg"), names[i], ys, ref, false);
  }
}

int run(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
  std::filesystem::create_directories(cfg.output_dir);
  switch (cfg.mode) {
    case Mode::GenData: {
      const Dataset ds = obtain_dataset(cfg, log);
      log << "wrote " << (cfg.output_dir / "dataset.json").string() << " (" << ds.N << " x " << ds.d_y << ")\n";
      return 0;
    }
    case Mode::Calibrate: {
      const Dataset ds = obtain_dataset(cfg, log);
      const auto trace =
          calib::run_algorithm1(ds, cfg.calibration, progress_printer(log, cfg.calibration.schedule.total_steps));
      emit_run(trace, cfg, opts, log);
      return 0;
    }
    case Mode::CalibrateJoint: {
      const Dataset ds = obtain_dataset(cfg, log);
      const auto res =
          calib::run_algorithm2(ds, cfg.calibration, progress_printer(log, cfg.calibration.schedule.total_steps));
      nop::save_operator(res.phi, cfg.output_dir / "operator.bin", cfg.output_dir / "operator.json");
      emit_run(res.trace, cfg, opts, log);
      return 0;
    }
    case Mode::Verify: return run_verify(cfg, log);
    case Mode::BayesCheck: return run_bayes(cfg, log);
    case Mode::FemConvergence: return run_convergence(cfg, log);
  }
  return 2;
}

}  // namespace priorflow::cli
