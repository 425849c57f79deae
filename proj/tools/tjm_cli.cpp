// tjm_cli: run / validate experiment configs and diff result files.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "tjm/errors.hpp"
#include "tjm/experiment.hpp"

namespace {

int report(const std::exception& e) {
  const nlohmann::json err = {{"error", tjm::error_class(e)}, {"message", e.what()}};
  std::cerr << err.dump() << '\n';
  return tjm::exit_code_for(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor jump method for Lindblad dynamics on matrix product states"};
  app.require_subcommand(1);

  std::string config_path, output_path;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Config file (JSON)")->required();
  run->add_option("-o,--output", output_path, "Override output.path");
  run->add_option("-w,--workers", workers, "Worker threads (default: config, then TJM_WORKERS, then 1)")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config and print its resolved form");
  validate->add_option("config", config_path, "Config file (JSON)")->required();

  std::string result_a, result_b;
  double tol = 0.0;
  auto* diff = app.add_subcommand("diff", "Max |mean difference| per observable between two result files");
  diff->add_option("result_a", result_a)->required();
  diff->add_option("result_b", result_b)->required();
  diff->add_option("--tol", tol, "Tolerance; exit 1 if any difference exceeds it")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      const tjm::ExperimentConfig cfg = tjm::load_config(config_path);
      tjm::check_resources(cfg);
      std::cout << cfg.resolved.dump(2) << '\n';
      return 0;
    }
    if (*run) {
      tjm::ExperimentConfig cfg = tjm::load_config(config_path);
      if (!output_path.empty()) {
        cfg.output_path = output_path;
        cfg.resolved["output"]["path"] = output_path;
      }
      const std::size_t w = workers > 0 ? workers : cfg.workers.value_or(tjm::default_workers());
      const tjm::RunReport rep = tjm::run_experiment(cfg, w);
      std::cout << "results " << rep.results_path << "\nmanifest " << rep.manifest_path << '\n';
      if (rep.aborted > 0) std::cout << "aborted trajectories " << rep.aborted << '\n';
      return 0;
    }
    const auto entries = tjm::diff_results(tjm::read_results(result_a), tjm::read_results(result_b));
    bool ok = true;
    std::printf("observable,max_abs_diff,time,within_tol\n");
    for (const auto& d : entries) {
      const bool within = d.max_abs_diff <= tol;
      ok = ok && within;
      std::printf("%s,%.17g,%.17g,%s\n", d.observable.c_str(), d.max_abs_diff, d.time, within ? "yes" : "no");
    }
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    return report(e);
  }
}
