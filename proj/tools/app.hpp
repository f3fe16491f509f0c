#pragma once

#include <iosfwd>

#include "config.hpp"
#include "priorflow/trace.hpp"

namespace priorflow::cli {

struct RunOptions {
  bool plots = false;
};

/// Dispatches on cfg.mode and writes artifacts under cfg.output_dir.
/// Returns the process exit status.
int run(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);

/// summary.json content: final alpha, relative errors, reference errors for presets.
nlohmann::ordered_json report(const RunTrace& trace, const ExperimentConfig& cfg);

/// Line plots of alpha components and loss against iteration.
void write_plots(const RunTrace& trace, const std::filesystem::path& dir);

}  // namespace priorflow::cli
