#include "tjm/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "tjm/errors.hpp"

namespace tjm {

double evaluate(const Observable& obs, const Mps& psi) {
  if (obs.op_b) return two_site_correlator(psi, obs.op, *obs.op_b, obs.site);
  return local_expectation(psi, obs.op, obs.site);
}

std::size_t steps_for(double total_time, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive and finite");
  if (!(total_time > 0.0) || !std::isfinite(total_time)) throw ConfigError("T must be positive and finite");
  const double r = total_time / dt;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-9 * std::max(1.0, r)) throw ConfigError("T / dt must be an integer");
  return static_cast<std::size_t>(n);
}

std::vector<LocalState> parse_initial(const std::string& text) {
  std::vector<LocalState> out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '0': out.push_back(LocalState::zero); break;
      case '1': out.push_back(LocalState::one); break;
      case '+': out.push_back(LocalState::plus); break;
      case '-': out.push_back(LocalState::minus); break;
      default: throw ConfigError(std::string("initial state: unknown site label '") + c + "'");
    }
  }
  return out;
}

std::string initial_to_string(const std::vector<LocalState>& initial) {
  static constexpr char labels[] = {'0', '1', '+', '-'};
  std::string out;
  for (LocalState s : initial) out.push_back(labels[static_cast<int>(s)]);
  return out;
}

std::vector<LocalState> domain_wall(std::size_t length) {
  std::vector<LocalState> out(length, LocalState::zero);
  for (std::size_t l = length / 2; l < length; ++l) out[l] = LocalState::one;
  return out;
}

Mps initial_state(const std::vector<LocalState>& initial) {
  const double r = 1.0 / std::sqrt(2.0);
  std::vector<Tensor> sites;
  sites.reserve(initial.size());
  for (LocalState s : initial) {
    switch (s) {
      case LocalState::zero: sites.push_back(Tensor({2, 1, 1}, {1.0, 0.0})); break;
      case LocalState::one: sites.push_back(Tensor({2, 1, 1}, {0.0, 1.0})); break;
      case LocalState::plus: sites.push_back(Tensor({2, 1, 1}, {r, r})); break;
      case LocalState::minus: sites.push_back(Tensor({2, 1, 1}, {r, -r})); break;
    }
  }
  return Mps(std::move(sites), 0);
}

std::vector<std::size_t> all_steps(std::size_t n) {
  std::vector<std::size_t> out(n + 1);
  for (std::size_t j = 0; j <= n; ++j) out[j] = j;
  return out;
}

void validate_plan(const SimulationPlan& plan) {
  const std::size_t length = plan.length();
  if (length < 2) throw ConfigError("chain length must be at least 2");
  if (plan.initial.size() != length)
    throw ConfigError("initial state has " + std::to_string(plan.initial.size()) + " sites, chain has " +
                      std::to_string(length));
  if (!(plan.dt > 0.0) || !std::isfinite(plan.dt)) throw ConfigError("dt must be positive and finite");
  if (plan.steps < 1) throw ConfigError("at least one time step required");
  if (plan.trajectories < 1) throw ConfigError("at least one trajectory required");
  try {
    validate_noise(plan.noise, length, 2);
    validate_tdvp_config(plan.tdvp);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  for (std::size_t i = 0; i < plan.sample_steps.size(); ++i) {
    if (plan.sample_steps[i] > plan.steps) throw ConfigError("sample time beyond T");
    if (i > 0 && plan.sample_steps[i] <= plan.sample_steps[i - 1])
      throw ConfigError("sample times must be strictly increasing");
  }
  for (const auto& o : plan.observables) {
    const std::size_t last = o.op_b ? o.site + 1 : o.site;
    if (last >= length) throw ConfigError("observable '" + o.name + "' refers to a site outside the chain");
    if (o.op.rows() != 2 || o.op.cols() != 2 || (o.op_b && (o.op_b->rows() != 2 || o.op_b->cols() != 2)))
      throw ConfigError("observable '" + o.name + "' must use 2x2 matrices");
  }
}

std::vector<Subfunction> make_schedule(const SimulationPlan& plan) {
  std::vector<Subfunction> out;
  const std::size_t n = plan.steps;
  if (plan.order == TrotterOrder::first) {
    for (std::size_t j = 0; j < n; ++j) out.push_back({"Fj", true, plan.dt});
    return out;
  }
  out.push_back({"F0", false, 0.5 * plan.dt});
  for (std::size_t j = 1; j < n; ++j) out.push_back({"Fj", true, plan.dt});
  out.push_back({"Fn", true, 0.5 * plan.dt});
  return out;
}

PreparedPlan::PreparedPlan(SimulationPlan plan) : plan_(std::move(plan)) {
  validate_plan(plan_);
  h_ = build_hamiltonian(plan_.hamiltonian);
  full_ = build_layer(plan_.noise, plan_.length(), plan_.dt);
  half_ = build_layer(plan_.noise, plan_.length(), 0.5 * plan_.dt);
  schedule_ = make_schedule(plan_);
}

const DissipativeLayer& PreparedPlan::layer_for(double dt) const {
  return dt == full_.dt_used ? full_ : half_;
}

Mps PreparedPlan::apply(const Subfunction& f, Mps phi, TrajectoryRng& rng, JumpDecision* decision) const {
  if (f.unitary) {
    if (phi.center() != std::optional<std::size_t>{0}) phi.move_center(0);
    phi = tdvp_step(std::move(phi), h_, plan_.dt, plan_.tdvp, plan_.tdvp_mode);
  }
  if (!plan_.noise.empty() && f.dissipation_dt > 0.0) phi = apply_layer(std::move(phi), layer_for(f.dissipation_dt));
  auto [out, dec] = stochastic_step(std::move(phi), plan_.noise, f.dissipation_dt, rng, plan_.jump_svd_threshold);
  if (out.center() != std::optional<std::size_t>{0}) out.move_center(0);
  if (decision) *decision = std::move(dec);
  return out;
}

TrajectoryResult PreparedPlan::run_trajectory(std::size_t trajectory_index) const {
  const SimulationPlan& p = plan_;
  TrajectoryResult res;
  res.index = trajectory_index;
  TrajectoryRng rng(p.master_seed, trajectory_index, Stream::main);
  std::size_t next_sample = 0;

  auto record = [&](std::size_t j, const Mps& psi) {
    if (next_sample >= p.sample_steps.size() || p.sample_steps[next_sample] != j) return;
    ++next_sample;
    res.times.push_back(p.dt * static_cast<double>(j));
    std::vector<double> row;
    row.reserve(p.observables.size());
    for (const auto& o : p.observables) row.push_back(evaluate(o, psi));
    res.values.push_back(std::move(row));
    res.bond_dims.push_back(psi.bond_dims());
  };
  auto wants = [&](std::size_t j) {
    return next_sample < p.sample_steps.size() && p.sample_steps[next_sample] == j;
  };
  auto step = [&](std::size_t k, Mps phi, TrajectoryRng& r, bool log) {
    JumpDecision dec;
    Mps out = apply(schedule_[k], std::move(phi), r, &dec);
    if (log) {
      res.delta_p.push_back(dec.delta_p);
      if (dec.delta_p_warning) ++res.delta_p_warnings;
      if (dec.jump)
        res.jumps.push_back({k, p.dt * static_cast<double>(k), *dec.jump, p.noise.jumps[*dec.jump].site});
    }
    return out;
  };

  Mps psi0 = initial_state(p.initial);
  record(0, psi0);
  const std::size_t n = p.steps;

  if (p.order == TrotterOrder::first) {
    Mps phi = std::move(psi0);
    for (std::size_t j = 1; j <= n; ++j) {
      phi = step(j - 1, std::move(phi), rng, true);
      record(j, phi);
    }
    res.final_state = std::move(phi);
    return res;
  }

  Mps phi = step(0, std::move(psi0), rng, true);
  for (std::size_t j = 1; j <= n; ++j) {
    if (j < n) {
      if (wants(j)) {
        TrajectoryRng sample_rng(p.master_seed, trajectory_index, Stream::sample, j);
        record(j, step(n, phi, sample_rng, false));
      }
      phi = step(j, std::move(phi), rng, true);
    } else {
      phi = step(n, std::move(phi), rng, true);
      record(n, phi);
    }
  }
  res.final_state = std::move(phi);
  return res;
}

TrajectoryResult run_trajectory(const SimulationPlan& plan, std::size_t trajectory_index) {
  return PreparedPlan(plan).run_trajectory(trajectory_index);
}

void Welford::add(double x) {
  ++n;
  const double delta = x - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (x - mean);
}

void Welford::merge(const Welford& o) {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n);
  const double nb = static_cast<double>(o.n);
  const double total = na + nb;
  const double delta = o.mean - mean;
  mean += delta * nb / total;
  m2 += o.m2 + delta * delta * na * nb / total;
  n += o.n;
}

ObservableEstimate Welford::estimate() const {
  ObservableEstimate e;
  e.n = n;
  e.mean = mean;
  e.std_error = n >= 2 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n))
                       : std::numeric_limits<double>::quiet_NaN();
  return e;
}

namespace {

struct ChunkResult {
  std::vector<Welford> cells;
  std::size_t completed = 0;
  std::vector<std::string> aborts;
  std::size_t warnings = 0;
  std::size_t jumps = 0;
  std::vector<Mps> states;
};

}  // namespace

EnsembleResult run_indexed_ensemble(const TrajectoryFn& fn, std::size_t offset, std::size_t count,
                                    std::size_t samples, std::size_t observables, std::size_t workers,
                                    bool retain_states) {
  const std::size_t n_chunks = (count + ensemble_chunk_size - 1) / ensemble_chunk_size;
  std::vector<ChunkResult> chunks(n_chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      ChunkResult& cr = chunks[c];
      cr.cells.assign(samples * observables, Welford{});
      const std::size_t lo = c * ensemble_chunk_size;
      const std::size_t hi = std::min(count, lo + ensemble_chunk_size);
      try {
        for (std::size_t i = lo; i < hi; ++i) {
          const std::size_t index = offset + i;
          SampleOutcome out;
          try {
            out = fn(index);
          } catch (const DegenerateStateError& e) {
            cr.aborts.push_back("trajectory " + std::to_string(index) + ": " + e.what());
            continue;
          } catch (const NumericError& e) {
            cr.aborts.push_back("trajectory " + std::to_string(index) + ": " + e.what());
            continue;
          }
          if (out.values.size() != samples) throw std::logic_error("ensemble: sample count mismatch");
          for (std::size_t s = 0; s < samples; ++s)
            for (std::size_t o = 0; o < observables; ++o) cr.cells[s * observables + o].add(out.values[s][o]);
          ++cr.completed;
          cr.warnings += out.warnings;
          cr.jumps += out.jumps;
          if (retain_states && out.final_state) cr.states.push_back(std::move(*out.final_state));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_chunks);
        return;
      }
    }
  };

  const std::size_t nthreads = std::max<std::size_t>(1, std::min(workers, n_chunks));
  if (nthreads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleResult res;
  std::vector<Welford> total(samples * observables);
  for (auto& cr : chunks) {
    for (std::size_t k = 0; k < total.size(); ++k) total[k].merge(cr.cells[k]);
    res.completed += cr.completed;
    res.aborted += cr.aborts.size();
    res.abort_messages.insert(res.abort_messages.end(), cr.aborts.begin(), cr.aborts.end());
    res.delta_p_warnings += cr.warnings;
    res.total_jumps += cr.jumps;
    for (auto& s : cr.states) res.final_states.push_back(std::move(s));
  }
  if (static_cast<double>(res.aborted) > max_abort_fraction * static_cast<double>(count)) {
    std::string msg = std::to_string(res.aborted) + " of " + std::to_string(count) + " trajectories aborted";
    if (!res.abort_messages.empty()) msg += "; first: " + res.abort_messages.front();
    throw EnsembleAbortError(msg);
  }
  res.estimates.assign(observables, std::vector<ObservableEstimate>(samples));
  for (std::size_t s = 0; s < samples; ++s)
    for (std::size_t o = 0; o < observables; ++o) res.estimates[o][s] = total[s * observables + o].estimate();
  return res;
}

EnsembleResult run_ensemble(const SimulationPlan& plan, std::size_t workers) {
  const PreparedPlan prepared(plan);
  const auto& p = prepared.plan();
  auto fn = [&](std::size_t index) {
    TrajectoryResult r = prepared.run_trajectory(index);
    SampleOutcome out;
    out.values = std::move(r.values);
    out.warnings = r.delta_p_warnings;
    out.jumps = r.jumps.size();
    if (p.retain_final_states) out.final_state = std::move(r.final_state);
    return out;
  };
  EnsembleResult res = run_indexed_ensemble(fn, p.trajectory_offset, p.trajectories, p.sample_steps.size(),
                                            p.observables.size(), workers, p.retain_final_states);
  for (std::size_t j : p.sample_steps) res.times.push_back(p.dt * static_cast<double>(j));
  for (const auto& o : p.observables) res.observable_names.push_back(o.name);
  return res;
}

std::size_t default_workers() {
  if (const char* env = std::getenv("TJM_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace tjm
