#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tjm/engine.hpp"

namespace tjm {

enum class Mode { tjm, mcwf_dense, lindblad_dense, convergence_study };
enum class OutputFormat { csv, json };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode m);

/// Batch protocol of the convergence study. Every (order, dt) group runs
/// `batches` disjoint batches of N trajectories for each N.
struct ConvergenceSpec {
  std::vector<std::size_t> trajectories;
  std::size_t batches = 50;
  std::vector<double> dts;
  std::vector<TrotterOrder> orders;
};

struct ExperimentConfig {
  Mode mode = Mode::tjm;
  SimulationPlan plan;
  std::string output_path;
  OutputFormat format = OutputFormat::csv;
  std::optional<std::size_t> workers;
  ConvergenceSpec convergence;
  /// Canonical form of the config with every default filled in.
  nlohmann::json resolved;
};

/// Throws ConfigError on schema violations (unknown keys, wrong types,
/// sites outside the chain, off-grid sample times, ...).
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

/// Size guards of the dense modes; throws ResourceError.
void check_resources(const ExperimentConfig& cfg);

/// Mean / standard error / count per (observable, time).
struct ResultTable {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<ObservableEstimate>> estimates;  ///< [observable][sample]
};

ResultTable to_table(const EnsembleResult& r);

/// tr(rho O) from the dense Lindblad solution at the sample times (n = 1, SE undefined).
ResultTable lindblad_reference(const SimulationPlan& plan);

/// Ensemble of dense first-order MCWF trajectories.
ResultTable mcwf_dense_ensemble(const SimulationPlan& plan, std::size_t workers);

struct ConvergenceRow {
  std::string observable;
  TrotterOrder order = TrotterOrder::second;
  double dt = 0.0;
  std::size_t trajectories = 0;
  std::size_t batches = 0;
  double error = 0.0;       ///< mean over batches of |batch mean - Lindblad| at T
  double batch_std = 0.0;   ///< sample std of the batch means
  double slope = 0.0;       ///< log-log fit of error vs N within the (observable, order, dt) group
  double prefactor = 0.0;   ///< geometric mean of error * sqrt(N) within the group
};

/// Batches start at plan.trajectory_offset and never share trajectories
/// within an (order, dt) group.
std::vector<ConvergenceRow> run_convergence_study(const SimulationPlan& plan, const ConvergenceSpec& spec,
                                                  std::size_t workers);

/// Least-squares slope of log y against log x; NaN with fewer than two points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Result files. CSV header: time,observable,mean,stderr,n (one row per cell,
// time-major, observables in config order). JSON: {"records": [{"time": t,
// "values": [{"observable", "mean", "stderr", "n"}, ...]}, ...]}.
void write_results_csv(std::ostream& os, const ResultTable& t);
void write_results_json(std::ostream& os, const ResultTable& t);
// CSV header: observable,order,dt,N,batches,error,batch_std,slope,prefactor.
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);
void write_convergence_json(std::ostream& os, const std::vector<ConvergenceRow>& rows);

/// Reads either result format back (detected from the first character).
ResultTable read_results(const std::string& path);

struct DiffEntry {
  std::string observable;
  double max_abs_diff = 0.0;
  double time = 0.0;  ///< where the maximum occurs
};

/// Per-observable max |mean_a - mean_b|; throws ConfigError if the two
/// tables do not cover the same (time, observable) cells.
std::vector<DiffEntry> diff_results(const ResultTable& a, const ResultTable& b);

struct RunReport {
  std::string results_path;
  std::string manifest_path;
  std::size_t completed = 0;
  std::size_t aborted = 0;
};

/// Executes the experiment and writes the result file plus
/// <results path>.manifest.json.
RunReport run_experiment(const ExperimentConfig& cfg, std::size_t workers);

/// 2 config, 3 resource guard, 4 ensemble aborts, 1 anything else.
int exit_code_for(const std::exception& e);
/// Machine-readable error class: "config", "resource", "aborts", "numeric", "internal".
std::string error_class(const std::exception& e);

}  // namespace tjm
