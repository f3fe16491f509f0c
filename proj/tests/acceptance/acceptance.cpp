// Acceptance runner: one PASS/FAIL line per criterion. Long calibration runs go
// through the CLI entry point so the artifacts on disk are what gets checked.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "app.hpp"
#include "config.hpp"
#include "priorflow/checks/suites.hpp"
#include "priorflow/parallel.hpp"

using namespace priorflow;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome from_checks(const std::vector<checks::CheckResult>& results, double seconds, double budget) {
  Outcome o{seconds < budget, ""};
  for (const auto& r : results) {
    o.passed = o.passed && r.passed;
    o.detail += r.name + (r.passed ? " ok" : " FAILED") + " (" + fmt("%.3g", r.value) + "); ";
  }
  o.detail += fmt("%.1f s", seconds) + fmt(" of %.0f s budget", budget);
  return o;
}

struct RunArtifacts {
  ordered_json summary;
  std::vector<double> loss;
  std::vector<std::vector<double>> alpha;
  double seconds = 0.0;
};

/// Runs a preset end to end through the CLI and reads the artifacts back.
RunArtifacts run_preset(const std::string& preset, cli::Mode mode, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json doc{{"preset", preset}, {"output_dir", dir.string()}};
  const cli::ExperimentConfig cfg = cli::parse_config(doc, mode);
  std::ofstream log(dir / "run.log");
  Clock clock;
  if (cli::run(cfg, {}, log) != 0) throw std::runtime_error(preset + ": run returned nonzero");
  RunArtifacts a;
  a.seconds = clock.seconds();
  std::ifstream is(dir / "summary.json");
  a.summary = ordered_json::parse(is);
  std::ifstream csv(dir / "trace.csv");
  for (const auto& r : parse_trace_csv(std::string(std::istreambuf_iterator<char>(csv), {}))) {
    a.loss.push_back(r.loss);
    a.alpha.push_back(r.alpha);
  }
  return a;
}

/// Checks each named relative error against its tolerance.
Outcome accuracy(const RunArtifacts& a, const std::map<std::string, double>& tol, double budget_s) {
  Outcome o{a.seconds <= budget_s, ""};
  const auto& errs = a.summary.at("relative_errors");
  for (const auto& [name, t] : tol) {
    const double e = errs.at(name).get<double>();
    o.passed = o.passed && e <= t;
    o.detail += name + " " + fmt("%.2f%%", 100 * e) + fmt(" (<= %.0f%%) ", 100 * t);
  }
  o.detail += fmt("runtime %.0f s", a.seconds) + fmt(" (<= %.0f s)", budget_s);
  return o;
}

double mean_window(const std::vector<double>& v, std::size_t end, std::size_t width) {
  double s = 0.0;
  for (std::size_t i = end - width; i < end; ++i) s += v[i];
  return s / static_cast<double>(width);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"priorflow acceptance criteria"};
  fs::path work = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--work-dir", work, "directory for run artifacts");
  app.add_option("--only", only, "criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int c) { return selected.empty() || selected.count(c) > 0; };
  // Criterion 8 compares against the runs of 5-7.
  auto needed = [&](int c) { return wanted(c) || (wanted(8) && c >= 5 && c <= 7); };

  fs::create_directories(work);
  std::ofstream report_file(work / "report.txt");
  int failures = 0;
  auto report = [&](int id, const std::string& title, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.passed) ++failures;
    char head[96];
    std::snprintf(head, sizeof head, "criterion %d %-4s ", id, o.passed ? "PASS" : "FAIL");
    const std::string line = head + title + ": " + o.detail + "\n";
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    report_file << line << std::flush;
  };

  if (wanted(1))
    report(1, "measure lemmas", [] {
      Clock c;
      std::vector<checks::CheckResult> r{checks::dirac_slicing(), checks::convolution_shift(),
                                         checks::w2_brute_force(), checks::weighted_pushforward()};
      return from_checks(r, c.seconds(), 60.0);
    });
  if (wanted(2))
    report(2, "fem correctness", [] {
      Clock c;
      std::vector<checks::CheckResult> r{checks::fem_analytic_1d(), checks::fem_stencil_vs_dense(),
                                         checks::fem_manufactured_ratio()};
      return from_checks(r, c.seconds(), 60.0);
    });
  if (wanted(3))
    report(3, "tape gradients", [] {
      Clock c;
      auto r = checks::tape_primitives();
      r.push_back(checks::tape_spectral_block());
      r.push_back(checks::tape_residual_loss());
      return from_checks(r, c.seconds(), 60.0);
    });
  if (wanted(4))
    report(4, "bayes recovery", [] {
      Clock c;
      return from_checks(checks::bayes_recovery(), c.seconds(), 60.0);
    });

  std::map<int, RunArtifacts> first;
  std::map<int, std::string> errors;
  auto attempt = [&](int id, const std::string& preset, cli::Mode mode) {
    try {
      first[id] = run_preset(preset, mode, work / ("c" + std::to_string(id)));
    } catch (const std::exception& e) {
      errors[id] = e.what();
    }
  };
  auto artifacts = [&](int id) -> const RunArtifacts& {
    if (!first.count(id)) throw std::runtime_error("run failed: " + errors[id]);
    return first[id];
  };
  if (needed(5)) {
    set_max_threads(1);
    attempt(5, "darcy1d-levelset-desk", cli::Mode::Calibrate);
    set_max_threads(0);
  }
  if (wanted(5))
    report(5, "algorithm 1, 1D level set", [&] {
      return accuracy(artifacts(5), {{"kappa_plus", 0.05}, {"kappa_minus", 0.05}, {"lambda", 0.20}}, 15 * 60.0);
    });

  if (needed(6)) {
    attempt(6, "darcy1d-levelset-joint-desk", cli::Mode::CalibrateJoint);
  }
  if (wanted(6))
    report(6, "algorithm 2, 1D level set", [&] {
      Outcome o = accuracy(artifacts(6), {{"kappa_plus", 0.10}, {"kappa_minus", 0.10}, {"lambda", 0.25}}, 30 * 60.0);
      const double s = artifacts(6).summary.at("surrogate_relative_error").get<double>();
      o.passed = o.passed && s <= 0.05;
      o.detail += fmt("; surrogate %.2f%%", 100 * s) + " (<= 5%)";
      return o;
    });

  if (needed(7)) {
    attempt(7, "darcy2d-lognormal-desk", cli::Mode::Calibrate);
  }
  if (wanted(7))
    report(7, "algorithm 1, 2D lognormal", [&] {
      return accuracy(artifacts(7), {{"nu", 0.20}, {"ell", 0.20}}, 45 * 60.0);
    });

  if (wanted(8))
    report(8, "reproducibility", [&] {
      Outcome o{true, ""};
      const std::vector<std::tuple<int, std::string, cli::Mode>> runs{
          {5, "darcy1d-levelset-desk", cli::Mode::Calibrate},
          {6, "darcy1d-levelset-joint-desk", cli::Mode::CalibrateJoint},
          {7, "darcy2d-lognormal-desk", cli::Mode::Calibrate}};
      for (const auto& [id, preset, mode] : runs) {
        const auto a = artifacts(id).summary.at("final_alpha").get<std::vector<double>>();
        if (id == 5) set_max_threads(1);
        const RunArtifacts again = run_preset(preset, mode, work / ("c" + std::to_string(id) + "_rerun"));
        set_max_threads(0);
        const auto b = again.summary.at("final_alpha").get<std::vector<double>>();
        const bool same = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
        o.passed = o.passed && same;
        o.detail += preset + (same ? " identical; " : " DIFFERS; ");
      }
      return o;
    });

  if (wanted(9))
    report(9, "non-identifiable lognormal", [&] {
      const RunArtifacts a = run_preset("darcy2d-lognormal-unidentifiable-desk", cli::Mode::Calibrate, work / "c9");
      const std::size_t T = a.loss.size();
      if (T < 40) throw std::runtime_error("trace too short");
      // Per-iteration losses use fresh samples, so both ends are averaged over T/20 iterations.
      const std::size_t w = T / 20;
      const double loss_half = mean_window(a.loss, T / 2, w), loss_end = mean_window(a.loss, T, w);
      const auto& mid = a.alpha[T / 2 - 1];
      const auto fin = a.summary.at("final_alpha").get<std::vector<double>>();
      double diff = 0.0, norm = 0.0;
      for (std::size_t i = 0; i < fin.size(); ++i) {
        diff += (fin[i] - mid[i]) * (fin[i] - mid[i]);
        norm += fin[i] * fin[i];
      }
      const double drift = std::sqrt(diff / norm);
      const double loss_change = std::abs(loss_end - loss_half) / std::abs(loss_half);
      const bool plateau_with_drift = loss_change <= 0.10 && drift > 0.05;
      const bool converged = drift <= 0.05;
      Outcome o{plateau_with_drift || converged, ""};
      o.detail = std::string(plateau_with_drift ? "loss plateau with alpha drift" : converged ? "converged" : "neither") +
                 fmt(": loss change %.1f%%", 100 * loss_change) + fmt(", alpha drift %.1f%%", 100 * drift) +
                 fmt(", final nu %.3g", fin[0]) + fmt(" ell %.3g", fin[1]);
      return o;
    });

  std::printf("%d criteria failed\n", failures);
  report_file << failures << " criteria failed\n";
  return failures == 0 ? 0 : 1;
}
