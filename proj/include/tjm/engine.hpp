#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tjm/dissipation.hpp"
#include "tjm/jump.hpp"
#include "tjm/mpo.hpp"
#include "tjm/mps.hpp"
#include "tjm/noise.hpp"
#include "tjm/tdvp.hpp"

namespace tjm {

enum class TrotterOrder { first, second };

/// Single-site factor of a product initial state.
enum class LocalState { zero, one, plus, minus };

/// Characters '0', '1', '+', '-', one per site; throws ConfigError otherwise.
std::vector<LocalState> parse_initial(const std::string& text);
std::string initial_to_string(const std::vector<LocalState>& initial);
/// |0> on sites 0 .. L/2 - 1, |1> on the rest.
std::vector<LocalState> domain_wall(std::size_t length);
/// Normalized product state with center 0.
Mps initial_state(const std::vector<LocalState>& initial);

/// Single-site expectation <op_site>, or the nearest-neighbor correlator
/// <op_site op_b_{site+1}> when op_b is set.
struct Observable {
  std::string name;
  LocalOp op;
  std::size_t site = 0;
  std::optional<LocalOp> op_b;
};

double evaluate(const Observable& obs, const Mps& psi);

struct SimulationPlan {
  HamiltonianSpec hamiltonian;
  NoiseModel noise;
  std::vector<LocalState> initial;
  double dt = 0.1;
  std::size_t steps = 10;            ///< n; total time T = n dt
  std::size_t trajectories = 1;      ///< N
  std::uint64_t trajectory_offset = 0;  ///< first trajectory index (disjoint batches)
  TdvpConfig tdvp;
  TdvpMode tdvp_mode = TdvpMode::dynamic;
  std::vector<std::size_t> sample_steps;  ///< j for t = j dt, ascending, within [0, n]
  std::vector<Observable> observables;
  std::uint64_t master_seed = 0;
  TrotterOrder order = TrotterOrder::second;
  double jump_svd_threshold = 1e-12;
  bool retain_final_states = false;

  double total_time() const { return dt * static_cast<double>(steps); }
  std::size_t length() const { return hamiltonian.length; }
};

/// Step count for T / dt; throws ConfigError unless integral to 1e-9.
std::size_t steps_for(double total_time, double dt);
/// Every grid point 0..n.
std::vector<std::size_t> all_steps(std::size_t n);

void validate_plan(const SimulationPlan& plan);

/// One subfunction F = J o D[dissipation_dt] o U[dt if unitary].
struct Subfunction {
  std::string label;  ///< "F0", "Fj" or "Fn"
  bool unitary = true;
  double dissipation_dt = 0.0;
};

std::vector<Subfunction> make_schedule(const SimulationPlan& plan);

struct JumpRecord {
  std::size_t step = 0;  ///< index of the subfunction in the schedule
  double time = 0.0;
  std::size_t operator_index = 0;
  std::size_t site = 0;
};

struct TrajectoryResult {
  std::size_t index = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  ///< [sample][observable]
  std::vector<std::vector<std::size_t>> bond_dims;  ///< [sample]
  std::vector<JumpRecord> jumps;            ///< main evolution only
  std::vector<double> delta_p;              ///< one per subfunction on the main evolution
  std::size_t delta_p_warnings = 0;
  std::optional<Mps> final_state;
};

/// Hamiltonian MPO and dissipative layers shared by all trajectories.
class PreparedPlan {
 public:
  explicit PreparedPlan(SimulationPlan plan);

  const SimulationPlan& plan() const noexcept { return plan_; }
  const Mpo& hamiltonian() const noexcept { return h_; }

  TrajectoryResult run_trajectory(std::size_t trajectory_index) const;

  /// Applies one subfunction; `phi` leaves with center 0 and unit norm.
  Mps apply(const Subfunction& f, Mps phi, TrajectoryRng& rng, JumpDecision* decision = nullptr) const;

 private:
  const DissipativeLayer& layer_for(double dt) const;

  SimulationPlan plan_;
  Mpo h_;
  DissipativeLayer full_;
  DissipativeLayer half_;
  std::vector<Subfunction> schedule_;
};

TrajectoryResult run_trajectory(const SimulationPlan& plan, std::size_t trajectory_index);

/// Mean and standard error of one (observable, time) cell.
struct ObservableEstimate {
  double mean = 0.0;
  double std_error = 0.0;  ///< sample std / sqrt(n); NaN when n < 2
  std::size_t n = 0;
  bool std_error_defined() const { return n >= 2; }
};

/// Running count / mean / M2 for one cell.
struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const Welford& o);
  ObservableEstimate estimate() const;
};

struct EnsembleResult {
  std::vector<double> times;
  std::vector<std::string> observable_names;
  std::vector<std::vector<ObservableEstimate>> estimates;  ///< [observable][sample]
  std::size_t completed = 0;
  std::size_t aborted = 0;
  std::vector<std::string> abort_messages;
  std::size_t delta_p_warnings = 0;
  std::size_t total_jumps = 0;
  std::vector<Mps> final_states;  ///< index order, only when retained
};

/// Per-index sample function for the generic ensemble driver. Returns the
/// [sample][observable] table; throws to abort the trajectory.
struct SampleOutcome {
  std::vector<std::vector<double>> values;
  std::size_t warnings = 0;
  std::size_t jumps = 0;
  std::optional<Mps> final_state;
};
using TrajectoryFn = std::function<SampleOutcome(std::size_t index)>;

inline constexpr std::size_t ensemble_chunk_size = 64;
inline constexpr double max_abort_fraction = 0.01;

/// Runs indices [offset, offset + count) on `workers` threads. Chunks of
/// ensemble_chunk_size are reduced in index order and merged in chunk order,
/// so the result does not depend on the worker count.
EnsembleResult run_indexed_ensemble(const TrajectoryFn& fn, std::size_t offset, std::size_t count,
                                    std::size_t samples, std::size_t observables, std::size_t workers,
                                    bool retain_states);

EnsembleResult run_ensemble(const SimulationPlan& plan, std::size_t workers = 1);

/// Worker count from TJM_WORKERS, else 1.
std::size_t default_workers();

}  // namespace tjm
