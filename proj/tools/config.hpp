#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorflow/bayes.hpp"
#include "priorflow/calib.hpp"
#include "priorflow/mesh.hpp"
#include "priorflow/randfield.hpp"

namespace priorflow::cli {

enum class Mode { GenData, Calibrate, CalibrateJoint, Verify, BayesCheck, FemConvergence };

Mode mode_from_string(const std::string& name);
std::string to_string(Mode mode);

/// Raised for any malformed config; the message names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSettings {
  randfield::PriorSpec prior;
  std::size_t N = 200;
  std::size_t d_y = 50;
  double gamma_std = 0.01;
  double f_const = 10.0;
};

struct BayesSettings {
  double y = 1.0;
  double gamma_std = 1.0;
  bayes::BayesCheckConfig check;
};

struct ExperimentConfig {
  Mode mode = Mode::Calibrate;
  std::string preset;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> dataset_path;
  Mesh mesh{1, 65};
  DataSettings data;
  calib::CalibrationConfig calibration;
  BayesSettings bayes;
  std::vector<int> convergence_sizes{9, 17, 33, 65};
  /// Full-scale relative errors the preset's experiment reported, by parameter name.
  std::map<std::string, double> reference_errors;
  std::optional<double> reference_surrogate_error;
  /// Fully resolved document (preset merged with overrides, defaults filled).
  nlohmann::ordered_json resolved;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();
/// The JSON document a preset expands to.
nlohmann::ordered_json preset_document(const std::string& name);

/// Validates and fills defaults. Unknown keys are an error.
ExperimentConfig parse_config(const nlohmann::ordered_json& doc, Mode mode);
ExperimentConfig parse_config_file(const std::filesystem::path& path, Mode mode);

}  // namespace priorflow::cli
