#include "priorflow/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace priorflow {

std::vector<double> sort_kappa(randfield::PriorFamily family, std::vector<double> alpha) {
  if (randfield::is_level_set(family) && alpha.size() == 3 && alpha[1] > alpha[2]) std::swap(alpha[1], alpha[2]);
  return alpha;
}

std::vector<double> relative_errors(std::span<const double> alpha, std::span<const double> true_alpha) {
  if (alpha.size() != true_alpha.size()) throw std::invalid_argument("relative_errors: length mismatch");
  std::vector<double> out(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) out[i] = std::abs(alpha[i] - true_alpha[i]) / std::abs(true_alpha[i]);
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trace_csv(const RunTrace& trace) {
  const std::size_t k = trace.records.empty() ? trace.initial_alpha.size() : trace.records.front().alpha.size();
  std::string out = "iter,loss,sw_term,reg_term";
  for (std::size_t i = 1; i <= k; ++i) out += ",alpha_" + std::to_string(i);
  out += ",lr,wall_ms\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.iter) + "," + format_double(r.loss) + "," + format_double(r.sw_term) + "," +
           format_double(r.reg_term);
    for (double a : r.alpha) out += "," + format_double(a);
    out += "," + format_double(r.lr) + "," + format_double(r.wall_ms) + "\n";
  }
  return out;
}

std::vector<TraceRecord> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("iter,loss,sw_term,reg_term"))
    throw std::invalid_argument("parse_trace_csv: missing header");
  const auto header_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (header_cols < 6) throw std::invalid_argument("parse_trace_csv: malformed header");
  const std::size_t k = header_cols - 6;
  std::vector<TraceRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header_cols)
      throw std::invalid_argument("parse_trace_csv: row has " + std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header_cols));
    TraceRecord r;
    r.iter = std::stoull(cells[0]);
    r.loss = std::stod(cells[1]);
    r.sw_term = std::stod(cells[2]);
    r.reg_term = std::stod(cells[3]);
    for (std::size_t i = 0; i < k; ++i) r.alpha.push_back(std::stod(cells[4 + i]));
    r.lr = std::stod(cells[4 + k]);
    r.wall_ms = std::stod(cells[5 + k]);
    records.push_back(std::move(r));
  }
  return records;
}

nlohmann::ordered_json summary_json(const RunTrace& trace, const nlohmann::ordered_json& config_echo) {
  const auto names = randfield::PriorSpec::alpha_names(trace.family);
  nlohmann::ordered_json doc;
  doc["family"] = std::string(randfield::to_string(trace.family));
  doc["alpha_names"] = names;
  doc["final_alpha"] = trace.final_alpha;
  doc["initial_alpha"] = trace.initial_alpha;
  if (trace.true_alpha) {
    doc["true_alpha"] = *trace.true_alpha;
    const auto errs = relative_errors(trace.final_alpha, *trace.true_alpha);
    nlohmann::ordered_json rel;
    for (std::size_t i = 0; i < errs.size(); ++i) rel[names[i]] = errs[i];
    doc["relative_errors"] = rel;
  }
  doc["iterations"] = trace.records.size();
  if (!trace.records.empty()) {
    doc["initial_loss"] = trace.records.front().loss;
    doc["final_loss"] = trace.records.back().loss;
  }
  if (trace.surrogate_error) doc["surrogate_relative_error"] = *trace.surrogate_error;
  doc["seeds"] = {{"master", trace.master_seed}};
  doc["total_ms"] = trace.total_ms;
  doc["config"] = config_echo;
  doc["metadata"] = trace.metadata;
  return doc;
}

}  // namespace priorflow
