#include <iostream>

#include <CLI11.hpp>

#include "app.hpp"
#include "config.hpp"
#include "priorflow/fem.hpp"
#include "priorflow/parallel.hpp"

int main(int argc, char** argv) {
  using namespace priorflow;
  CLI::App app{"Learn prior parameters from indirect Darcy-flow observations"};
  std::string mode, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool plots = false;
  app.add_option("mode", mode, "gen-data | calibrate | calibrate-joint | verify | bayes-check | fem-convergence")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "master seed (overrides seed)");
  app.add_option("--threads", threads, "worker thread cap, 0 for all cores");
  app.add_flag("--plots", plots, "write SVG convergence plots");
  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = cli::parse_config_file(config_path, cli::mode_from_string(mode));
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) {
      cfg.seed = *seed;
      cfg.calibration.seed = *seed;
      cfg.resolved["seed"] = *seed;
    }
    set_max_threads(threads);
    return cli::run(cfg, {plots}, std::cout);
  } catch (const cli::ConfigError& e) {
    std::cerr << "priorflow: " << e.what() << '\n';
    return 2;
  } catch (const fem::SolverError& e) {
    std::cerr << "priorflow: fem: " << e.what() << " after " << e.iterations() << " iterations\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "priorflow: " << e.what() << '\n';
    return 1;
  }
}
