#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorflow/randfield.hpp"

namespace priorflow {

struct TraceRecord {
  std::size_t iter = 0;
  double loss = 0.0;
  double sw_term = 0.0;
  double reg_term = 0.0;
  std::vector<double> alpha;  // iterate the loss was evaluated at
  double lr = 0.0;
  double wall_ms = 0.0;
  std::vector<double> inner_losses;  // J4 per inner step (bilevel runs only)
};

struct RunTrace {
  randfield::PriorFamily family = randfield::PriorFamily::LevelSetSmooth;
  std::vector<TraceRecord> records;
  std::vector<double> initial_alpha;
  std::vector<double> final_alpha;  // kappa pair sorted for level-set families
  std::optional<std::vector<double>> true_alpha;
  std::uint64_t master_seed = 0;
  double total_ms = 0.0;
  std::optional<double> surrogate_error;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

/// Level-set alpha = {lambda, kappa_minus, kappa_plus}: returns it with
/// kappa_minus <= kappa_plus. Other families pass through.
std::vector<double> sort_kappa(randfield::PriorFamily family, std::vector<double> alpha);

/// |a - a_true| / a_true per component.
std::vector<double> relative_errors(std::span<const double> alpha, std::span<const double> true_alpha);

std::string trace_csv(const RunTrace& trace);
/// Parses trace_csv output back into records (inner losses are not stored in the CSV).
std::vector<TraceRecord> parse_trace_csv(const std::string& text);

/// Final alpha, relative errors when the truth is known, seeds, timings, metadata.
nlohmann::ordered_json summary_json(const RunTrace& trace, const nlohmann::ordered_json& config_echo);

/// %.17g formatting used for every number written to CSV.
std::string format_double(double v);

}  // namespace priorflow
