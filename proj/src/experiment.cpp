#include "tjm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "tjm/errors.hpp"
#include "tjm/operators.hpp"
#include "tjm/reference.hpp"

namespace tjm {

using nlohmann::json;

Mode parse_mode(const std::string& name) {
  if (name == "tjm") return Mode::tjm;
  if (name == "mcwf-dense") return Mode::mcwf_dense;
  if (name == "lindblad-dense") return Mode::lindblad_dense;
  if (name == "convergence-study") return Mode::convergence_study;
  throw ConfigError("unknown mode '" + name + "'");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::tjm: return "tjm";
    case Mode::mcwf_dense: return "mcwf-dense";
    case Mode::lindblad_dense: return "lindblad-dense";
    case Mode::convergence_study: return "convergence-study";
  }
  return "?";
}

namespace {

std::string order_name(TrotterOrder o) { return o == TrotterOrder::first ? "first" : "second"; }

TrotterOrder parse_order(const std::string& s) {
  if (s == "first") return TrotterOrder::first;
  if (s == "second") return TrotterOrder::second;
  throw ConfigError("order must be 'first' or 'second', got '" + s + "'");
}

std::string tdvp_mode_name(TdvpMode m) {
  switch (m) {
    case TdvpMode::one_site: return "one_site";
    case TdvpMode::two_site: return "two_site";
    case TdvpMode::dynamic: return "dynamic";
  }
  return "?";
}

TdvpMode parse_tdvp_mode(const std::string& s) {
  if (s == "one_site") return TdvpMode::one_site;
  if (s == "two_site") return TdvpMode::two_site;
  if (s == "dynamic") return TdvpMode::dynamic;
  throw ConfigError("tdvp.mode must be one_site, two_site or dynamic, got '" + s + "'");
}

LocalOp named_observable(const std::string& s) {
  if (s == "X") return ops::pauli_x();
  if (s == "Y") return ops::pauli_y();
  if (s == "Z") return ops::pauli_z();
  if (s == "I") return ops::identity();
  throw ConfigError("observable operator must be X, Y, Z or I, got '" + s + "'");
}

LocalOp named_channel(const std::string& s) {
  if (s == "relaxation") return ops::lowering();
  if (s == "excitation") return ops::raising();
  if (s == "dephasing") return ops::pauli_z();
  if (s == "bit_flip") return ops::pauli_x();
  throw ConfigError("noise channel must be relaxation, excitation, dephasing or bit_flip, got '" + s + "'");
}

// Strict object access: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + "." + key + " is required");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError(path(key) + " must be a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::size_t count(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path(key) + " must be a non-negative integer");
    return v.get<std::size_t>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) { return has(key) ? count(key) : fallback; }

  std::string text(const std::string& key) {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(path(key) + " must be a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::size_t grid_step(double t, double dt, std::size_t n, const std::string& what) {
  const double r = t / dt;
  const double j = std::round(r);
  if (!(t >= 0.0) || std::abs(r - j) > 1e-9 * std::max(1.0, r) || j > static_cast<double>(n))
    throw ConfigError(what + ": time " + std::to_string(t) + " is not on the grid {0, dt, ..., T}");
  return static_cast<std::size_t>(j);
}

std::vector<std::size_t> parse_sites(const json& v, std::size_t length, const std::string& where) {
  std::vector<std::size_t> out;
  if (v.is_string() && v.get<std::string>() == "all") {
    out.resize(length);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  if (!v.is_array()) throw ConfigError(where + " must be \"all\" or a list of site indices");
  for (const auto& s : v) {
    if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError(where + ": sites are non-negative integers");
    const auto site = s.get<std::size_t>();
    if (site >= length) throw ConfigError(where + ": site " + std::to_string(site) + " outside the chain");
    out.push_back(site);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  SimulationPlan& plan = cfg.plan;
  json& r = cfg.resolved;
  Section top(doc, "config");

  cfg.mode = parse_mode(top.text("mode", "tjm"));
  r["mode"] = mode_name(cfg.mode);

  {
    Section m(top.get("model"), "model");
    plan.hamiltonian.model = parse_model(m.text("name"));
    plan.hamiltonian.length = m.count("length");
    plan.hamiltonian.coupling = m.number("J", 1.0);
    const bool tfim = plan.hamiltonian.model == Model::tfim;
    const std::string field_key = tfim ? "g" : "h";
    plan.hamiltonian.field = m.number(field_key, tfim ? 1.0 : 0.0);
    m.finish();
    if (plan.hamiltonian.length < 2) throw ConfigError("model.length must be at least 2");
    r["model"] = {{"name", model_name(plan.hamiltonian.model)},
                  {"length", plan.hamiltonian.length},
                  {"J", plan.hamiltonian.coupling},
                  {field_key, plan.hamiltonian.field}};
  }
  const std::size_t length = plan.length();

  r["noise"] = json::array();
  if (top.has("noise")) {
    const json& list = top.get("noise");
    if (!list.is_array()) throw ConfigError("noise must be a list of channels");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "noise[" + std::to_string(i) + "]";
      Section c(list[i], where);
      const std::string channel = c.text("channel");
      const LocalOp op = named_channel(channel);
      const double gamma = c.number("gamma");
      if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError(where + ".gamma must be finite and >= 0");
      std::vector<std::size_t> sites;
      if (c.has("sites")) {
        sites = parse_sites(c.get("sites"), length, where + ".sites");
      } else {
        sites = parse_sites(json("all"), length, where);
      }
      c.finish();
      for (std::size_t s : sites) plan.noise.jumps.push_back({s, op, gamma, channel});
      r["noise"].push_back({{"channel", channel}, {"gamma", gamma}, {"sites", sites}});
    }
  }

  {
    const std::string init = top.text("initial");
    if (init == "domain_wall") {
      plan.initial = domain_wall(length);
    } else {
      plan.initial = parse_initial(init);
    }
    if (plan.initial.size() != length)
      throw ConfigError("initial state has " + std::to_string(plan.initial.size()) + " sites, model.length is " +
                        std::to_string(length));
    r["initial"] = initial_to_string(plan.initial);
  }

  {
    Section t(top.get("time"), "time");
    const std::string unit = t.text("unit", "1/J");
    if (unit != "1/J") throw ConfigError("time.unit must be \"1/J\"");
    plan.dt = t.number("dt");
    const double total = t.number("T");
    plan.steps = steps_for(total, plan.dt);
    if (t.has("steps") && t.count("steps") != plan.steps) throw ConfigError("time.steps disagrees with T / dt");
    json samples_r;
    if (!t.has("sample_times") || (t.get("sample_times").is_string() && t.get("sample_times") == "all")) {
      plan.sample_steps = all_steps(plan.steps);
      samples_r = "all";
    } else if (t.get("sample_times").is_string() && t.get("sample_times") == "final") {
      plan.sample_steps = {plan.steps};
      samples_r = "final";
    } else {
      const json& list = t.get("sample_times");
      if (!list.is_array() || list.empty())
        throw ConfigError("time.sample_times must be \"all\", \"final\" or a non-empty list of times");
      for (const auto& v : list) {
        if (!v.is_number()) throw ConfigError("time.sample_times entries must be numbers");
        plan.sample_steps.push_back(grid_step(v.get<double>(), plan.dt, plan.steps, "time.sample_times"));
      }
      samples_r = json::array();
      for (std::size_t j : plan.sample_steps) samples_r.push_back(plan.dt * static_cast<double>(j));
    }
    t.finish();
    r["time"] = {{"unit", unit}, {"dt", plan.dt}, {"T", total}, {"steps", plan.steps}, {"sample_times", samples_r}};
  }

  plan.trajectories = top.count("trajectories", 1);
  plan.trajectory_offset = top.count("trajectory_offset", 0);
  if (top.has("master_seed")) {
    const json& seed = top.get("master_seed");
    if (!seed.is_number_unsigned()) throw ConfigError("master_seed must be a non-negative integer");
    plan.master_seed = seed.get<std::uint64_t>();
  }
  plan.order = parse_order(top.text("order", "second"));
  plan.jump_svd_threshold = top.number("jump_svd_threshold", 1e-12);
  r["trajectories"] = plan.trajectories;
  r["trajectory_offset"] = plan.trajectory_offset;
  r["master_seed"] = plan.master_seed;
  r["order"] = order_name(plan.order);
  r["jump_svd_threshold"] = plan.jump_svd_threshold;

  {
    json empty = json::object();
    Section t(top.has("tdvp") ? top.get("tdvp") : empty, "tdvp");
    plan.tdvp_mode = parse_tdvp_mode(t.text("mode", "dynamic"));
    json chi_r = "unbounded";
    if (t.has("chi_max")) {
      const json& c = t.get("chi_max");
      if (c.is_string() && c == "unbounded") {
        plan.tdvp.chi_max = unbounded_rank;
      } else if (c.is_number_integer() && c.get<long long>() >= 1) {
        plan.tdvp.chi_max = c.get<std::size_t>();
        chi_r = plan.tdvp.chi_max;
      } else {
        throw ConfigError("tdvp.chi_max must be a positive integer or \"unbounded\"");
      }
    }
    plan.tdvp.svd_threshold = t.number("svd_threshold", plan.tdvp.svd_threshold);
    plan.tdvp.lanczos_max_iters = static_cast<int>(t.count("lanczos_max_iters", 25));
    plan.tdvp.lanczos_tol = t.number("lanczos_tol", plan.tdvp.lanczos_tol);
    plan.tdvp.global_switch = t.flag("global_switch", false);
    t.finish();
    r["tdvp"] = {{"mode", tdvp_mode_name(plan.tdvp_mode)},
                 {"chi_max", chi_r},
                 {"svd_threshold", plan.tdvp.svd_threshold},
                 {"lanczos_max_iters", plan.tdvp.lanczos_max_iters},
                 {"lanczos_tol", plan.tdvp.lanczos_tol},
                 {"global_switch", plan.tdvp.global_switch}};
  }

  {
    const json& list = top.get("observables");
    if (!list.is_array() || list.empty()) throw ConfigError("observables must be a non-empty list");
    r["observables"] = json::array();
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "observables[" + std::to_string(i) + "]";
      Section o(list[i], where);
      Observable obs;
      obs.site = o.count("site");
      json op_r;
      const json& op = o.get("op");
      if (op.is_string()) {
        obs.op = named_observable(op.get<std::string>());
        op_r = op;
      } else if (op.is_array() && op.size() == 2 && op[0].is_string() && op[1].is_string()) {
        obs.op = named_observable(op[0].get<std::string>());
        obs.op_b = named_observable(op[1].get<std::string>());
        op_r = op;
      } else {
        throw ConfigError(where + ".op must be an operator name or a pair of names");
      }
      std::string default_name = op.is_string() ? op.get<std::string>() : op[0].get<std::string>() + op[1].get<std::string>();
      default_name += "_" + std::to_string(obs.site);
      obs.name = o.text("name", default_name);
      o.finish();
      if (obs.name.empty() || obs.name.find_first_of(",\"\n") != std::string::npos)
        throw ConfigError(where + ".name must be non-empty without commas or quotes");
      if (!names.insert(obs.name).second) throw ConfigError("duplicate observable name '" + obs.name + "'");
      r["observables"].push_back({{"name", obs.name}, {"op", op_r}, {"site", obs.site}});
      plan.observables.push_back(std::move(obs));
    }
  }

  {
    json empty = json::object();
    Section o(top.has("output") ? top.get("output") : empty, "output");
    const std::string fmt = o.text("format", "csv");
    if (fmt == "csv") {
      cfg.format = OutputFormat::csv;
    } else if (fmt == "json") {
      cfg.format = OutputFormat::json;
    } else {
      throw ConfigError("output.format must be csv or json");
    }
    cfg.output_path = o.text("path", std::string("results.") + fmt);
    o.finish();
    r["output"] = {{"path", cfg.output_path}, {"format", fmt}};
  }

  if (top.has("workers")) {
    const std::size_t w = top.count("workers");
    if (w < 1) throw ConfigError("workers must be at least 1");
    cfg.workers = w;
  }

  if (cfg.mode == Mode::convergence_study) {
    Section c(top.get("convergence"), "convergence");
    const json& ns = c.get("trajectories");
    if (!ns.is_array() || ns.empty()) throw ConfigError("convergence.trajectories must be a non-empty list");
    for (const auto& v : ns) {
      if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("convergence.trajectories entries must be >= 1");
      cfg.convergence.trajectories.push_back(v.get<std::size_t>());
    }
    cfg.convergence.batches = c.count("batches", 50);
    if (cfg.convergence.batches < 2) throw ConfigError("convergence.batches must be at least 2");
    if (c.has("dt")) {
      const json& dts = c.get("dt");
      if (!dts.is_array() || dts.empty()) throw ConfigError("convergence.dt must be a non-empty list");
      for (const auto& v : dts) {
        if (!v.is_number()) throw ConfigError("convergence.dt entries must be numbers");
        const double dt = v.get<double>();
        steps_for(plan.total_time(), dt);
        cfg.convergence.dts.push_back(dt);
      }
    } else {
      cfg.convergence.dts = {plan.dt};
    }
    if (c.has("orders")) {
      const json& os = c.get("orders");
      if (!os.is_array() || os.empty()) throw ConfigError("convergence.orders must be a non-empty list");
      for (const auto& v : os) {
        if (!v.is_string()) throw ConfigError("convergence.orders entries must be strings");
        cfg.convergence.orders.push_back(parse_order(v.get<std::string>()));
      }
    } else {
      cfg.convergence.orders = {plan.order};
    }
    c.finish();
    json orders = json::array();
    for (auto o : cfg.convergence.orders) orders.push_back(order_name(o));
    r["convergence"] = {{"trajectories", cfg.convergence.trajectories},
                        {"batches", cfg.convergence.batches},
                        {"dt", cfg.convergence.dts},
                        {"orders", orders}};
  } else if (top.has("convergence")) {
    throw ConfigError("convergence is only valid with mode convergence-study");
  }

  top.finish();
  validate_plan(plan);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return parse_config(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void check_resources(const ExperimentConfig& cfg) {
  const std::size_t length = cfg.plan.length();
  const auto limit = [&](std::size_t max, const char* what) {
    if (length > max)
      throw ResourceError(std::string(what) + " needs L <= " + std::to_string(max) + ", config has L = " +
                          std::to_string(length));
  };
  switch (cfg.mode) {
    case Mode::tjm: break;
    case Mode::mcwf_dense: limit(max_mcwf_sites, "mode mcwf-dense"); break;
    case Mode::lindblad_dense: limit(max_lindblad_sites, "mode lindblad-dense"); break;
    case Mode::convergence_study: limit(max_lindblad_sites, "mode convergence-study (Lindblad reference)"); break;
  }
}

ResultTable to_table(const EnsembleResult& r) { return {r.times, r.observable_names, r.estimates}; }

namespace {

Eigen::MatrixXcd dense_observable(const Observable& o, std::size_t length) {
  return o.op_b ? embed_pair(o.op, *o.op_b, o.site, length) : embed_site(o.op, o.site, length);
}

ResultTable empty_table(const SimulationPlan& plan) {
  ResultTable t;
  for (std::size_t j : plan.sample_steps) t.times.push_back(plan.dt * static_cast<double>(j));
  for (const auto& o : plan.observables) t.names.push_back(o.name);
  t.estimates.assign(plan.observables.size(), std::vector<ObservableEstimate>(plan.sample_steps.size()));
  return t;
}

}  // namespace

ResultTable lindblad_reference(const SimulationPlan& plan) {
  validate_plan(plan);
  const std::size_t length = plan.length();
  if (length > max_lindblad_sites) throw ResourceError("Lindblad reference needs L <= " + std::to_string(max_lindblad_sites));
  const Eigen::MatrixXcd h = dense_hamiltonian(plan.hamiltonian);
  const Eigen::MatrixXcd rho0 = pure_density(initial_state(plan.initial).to_dense());
  const auto rhos = lindblad_solve(h, plan.noise, rho0, plan.dt, plan.total_time());
  ResultTable t = empty_table(plan);
  for (std::size_t o = 0; o < plan.observables.size(); ++o) {
    const Eigen::MatrixXcd op = dense_observable(plan.observables[o], length);
    for (std::size_t s = 0; s < plan.sample_steps.size(); ++s) {
      Welford w;
      w.add((rhos.at(plan.sample_steps[s]) * op).trace().real());
      t.estimates[o][s] = w.estimate();
    }
  }
  return t;
}

ResultTable mcwf_dense_ensemble(const SimulationPlan& plan, std::size_t workers) {
  validate_plan(plan);
  const std::size_t length = plan.length();
  if (length > max_mcwf_sites) throw ResourceError("MCWF needs L <= " + std::to_string(max_mcwf_sites));
  const DenseMcwf mcwf(dense_hamiltonian(plan.hamiltonian), plan.noise, plan.dt);
  const Eigen::VectorXcd psi0 = initial_state(plan.initial).to_dense();
  std::vector<Eigen::MatrixXcd> ops;
  for (const auto& o : plan.observables) ops.push_back(dense_observable(o, length));

  auto fn = [&](std::size_t index) {
    TrajectoryRng rng(plan.master_seed, index, Stream::main);
    Eigen::VectorXcd psi = psi0;
    SampleOutcome out;
    std::size_t next = 0;
    for (std::size_t j = 0; j <= plan.steps && next < plan.sample_steps.size(); ++j) {
      if (j > 0 && mcwf.step(psi, rng) >= 0) ++out.jumps;
      if (plan.sample_steps[next] != j) continue;
      std::vector<double> row;
      for (const auto& op : ops) row.push_back(psi.dot(op * psi).real());
      out.values.push_back(std::move(row));
      ++next;
    }
    return out;
  };
  EnsembleResult r = run_indexed_ensemble(fn, plan.trajectory_offset, plan.trajectories, plan.sample_steps.size(),
                                          plan.observables.size(), workers, false);
  ResultTable t = empty_table(plan);
  t.estimates = std::move(r.estimates);
  return t;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("loglog_slope: size mismatch");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / sxx;
}

std::vector<ConvergenceRow> run_convergence_study(const SimulationPlan& base, const ConvergenceSpec& spec,
                                                  std::size_t workers) {
  std::vector<ConvergenceRow> rows;
  const double total = base.total_time();
  for (TrotterOrder order : spec.orders) {
    for (double dt : spec.dts) {
      SimulationPlan plan = base;
      plan.order = order;
      plan.dt = dt;
      plan.steps = steps_for(total, dt);
      plan.sample_steps = {plan.steps};
      plan.retain_final_states = false;
      const ResultTable exact = lindblad_reference(plan);
      const std::size_t n_obs = plan.observables.size();

      std::vector<ConvergenceRow> group(n_obs * spec.trajectories.size());
      std::uint64_t cursor = base.trajectory_offset;
      for (std::size_t k = 0; k < spec.trajectories.size(); ++k) {
        const std::size_t n = spec.trajectories[k];
        std::vector<Welford> abs_err(n_obs), means(n_obs);
        for (std::size_t b = 0; b < spec.batches; ++b) {
          plan.trajectories = n;
          plan.trajectory_offset = cursor;
          cursor += n;
          const EnsembleResult r = run_ensemble(plan, workers);
          for (std::size_t o = 0; o < n_obs; ++o) {
            const double m = r.estimates[o][0].mean;
            means[o].add(m);
            abs_err[o].add(std::abs(m - exact.estimates[o][0].mean));
          }
        }
        for (std::size_t o = 0; o < n_obs; ++o) {
          ConvergenceRow& row = group[o * spec.trajectories.size() + k];
          row.observable = plan.observables[o].name;
          row.order = order;
          row.dt = dt;
          row.trajectories = n;
          row.batches = spec.batches;
          row.error = abs_err[o].mean;
          row.batch_std = std::sqrt(means[o].m2 / static_cast<double>(means[o].n - 1));
        }
      }
      for (std::size_t o = 0; o < n_obs; ++o) {
        std::vector<double> xs, ys;
        double log_c = 0.0;
        for (std::size_t k = 0; k < spec.trajectories.size(); ++k) {
          const ConvergenceRow& row = group[o * spec.trajectories.size() + k];
          xs.push_back(static_cast<double>(row.trajectories));
          ys.push_back(row.error);
          log_c += std::log(row.error * std::sqrt(static_cast<double>(row.trajectories)));
        }
        const double slope = loglog_slope(xs, ys);
        const double c = std::exp(log_c / static_cast<double>(xs.size()));
        for (std::size_t k = 0; k < spec.trajectories.size(); ++k) {
          group[o * spec.trajectories.size() + k].slope = slope;
          group[o * spec.trajectories.size() + k].prefactor = c;
        }
      }
      rows.insert(rows.end(), group.begin(), group.end());
    }
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_results_csv(std::ostream& os, const ResultTable& t) {
  os << "time,observable,mean,stderr,n\n";
  for (std::size_t s = 0; s < t.times.size(); ++s)
    for (std::size_t o = 0; o < t.names.size(); ++o) {
      const ObservableEstimate& e = t.estimates[o][s];
      os << fmt(t.times[s]) << ',' << t.names[o] << ',' << fmt(e.mean) << ',' << fmt(e.std_error) << ',' << e.n
         << '\n';
    }
}

void write_results_json(std::ostream& os, const ResultTable& t) {
  json records = json::array();
  for (std::size_t s = 0; s < t.times.size(); ++s) {
    json values = json::array();
    for (std::size_t o = 0; o < t.names.size(); ++o) {
      const ObservableEstimate& e = t.estimates[o][s];
      values.push_back({{"observable", t.names[o]},
                        {"mean", number_or_null(e.mean)},
                        {"stderr", number_or_null(e.std_error)},
                        {"n", e.n}});
    }
    records.push_back({{"time", t.times[s]}, {"values", values}});
  }
  os << json{{"records", records}}.dump(2) << '\n';
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "observable,order,dt,N,batches,error,batch_std,slope,prefactor\n";
  for (const auto& r : rows)
    os << r.observable << ',' << order_name(r.order) << ',' << fmt(r.dt) << ',' << r.trajectories << ','
       << r.batches << ',' << fmt(r.error) << ',' << fmt(r.batch_std) << ',' << fmt(r.slope) << ','
       << fmt(r.prefactor) << '\n';
}

void write_convergence_json(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"observable", r.observable},
                   {"order", order_name(r.order)},
                   {"dt", r.dt},
                   {"N", r.trajectories},
                   {"batches", r.batches},
                   {"error", number_or_null(r.error)},
                   {"batch_std", number_or_null(r.batch_std)},
                   {"slope", number_or_null(r.slope)},
                   {"prefactor", number_or_null(r.prefactor)}});
  os << json{{"rows", out}}.dump(2) << '\n';
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number '" + s + "'");
  }
}

// Builds the table from (time, observable, estimate) cells in file order.
struct TableBuilder {
  ResultTable t;
  std::map<std::string, std::size_t> name_index;

  void add(double time, const std::string& name, ObservableEstimate e) {
    if (t.times.empty() || t.times.back() != time) t.times.push_back(time);
    auto it = name_index.find(name);
    if (it == name_index.end()) {
      it = name_index.emplace(name, t.names.size()).first;
      t.names.push_back(name);
      t.estimates.emplace_back();
    }
    auto& col = t.estimates[it->second];
    if (col.size() + 1 != t.times.size()) throw ConfigError("result file: cells are not time-major and complete");
    col.push_back(e);
  }

  ResultTable finish() {
    for (const auto& col : t.estimates)
      if (col.size() != t.times.size()) throw ConfigError("result file: missing cells");
    return std::move(t);
  }
};

}  // namespace

ResultTable read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read result file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  TableBuilder b;
  if (first != std::string::npos && text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
      for (const auto& rec : doc.at("records")) {
        const double time = rec.at("time").get<double>();
        for (const auto& v : rec.at("values")) {
          ObservableEstimate e;
          e.mean = v.at("mean").is_null() ? std::numeric_limits<double>::quiet_NaN() : v.at("mean").get<double>();
          e.std_error =
              v.at("stderr").is_null() ? std::numeric_limits<double>::quiet_NaN() : v.at("stderr").get<double>();
          e.n = v.at("n").get<std::size_t>();
          b.add(time, v.at("observable").get<std::string>(), e);
        }
      }
    } catch (const json::exception& e) {
      throw ConfigError("result file '" + path + "': " + e.what());
    }
    return b.finish();
  }
  std::istringstream lines(text);
  std::string line;
  if (!std::getline(lines, line) || line != "time,observable,mean,stderr,n")
    throw ConfigError("result file '" + path + "': unexpected CSV header");
  std::size_t lineno = 1;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 5) throw ConfigError(where + ": expected 5 fields");
    ObservableEstimate e;
    e.mean = parse_double(f[2], where);
    e.std_error = parse_double(f[3], where);
    e.n = static_cast<std::size_t>(parse_double(f[4], where));
    b.add(parse_double(f[0], where), f[1], e);
  }
  return b.finish();
}

std::vector<DiffEntry> diff_results(const ResultTable& a, const ResultTable& b) {
  if (a.times.size() != b.times.size()) throw ConfigError("diff: different number of sample times");
  for (std::size_t s = 0; s < a.times.size(); ++s)
    if (std::abs(a.times[s] - b.times[s]) > 1e-9 * std::max(1.0, std::abs(a.times[s])))
      throw ConfigError("diff: sample times differ");
  std::vector<DiffEntry> out;
  for (std::size_t o = 0; o < a.names.size(); ++o) {
    const auto it = std::find(b.names.begin(), b.names.end(), a.names[o]);
    if (it == b.names.end()) throw ConfigError("diff: observable '" + a.names[o] + "' missing from the second file");
    const std::size_t ob = static_cast<std::size_t>(it - b.names.begin());
    DiffEntry d{a.names[o], 0.0, a.times.empty() ? 0.0 : a.times.front()};
    for (std::size_t s = 0; s < a.times.size(); ++s) {
      const double delta = std::abs(a.estimates[o][s].mean - b.estimates[ob][s].mean);
      if (!(delta <= d.max_abs_diff)) {
        d.max_abs_diff = delta;
        d.time = a.times[s];
      }
    }
    out.push_back(d);
  }
  if (b.names.size() != a.names.size()) throw ConfigError("diff: the files have different observables");
  return out;
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ResourceError("write failed for '" + path + "'");
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
  check_resources(cfg);
  RunReport rep;
  rep.results_path = cfg.output_path;
  rep.manifest_path = cfg.output_path + ".manifest.json";
  json stats = json::object();
  std::ostringstream body;

  if (cfg.mode == Mode::convergence_study) {
    const auto rows = run_convergence_study(cfg.plan, cfg.convergence, workers);
    if (cfg.format == OutputFormat::csv) {
      write_convergence_csv(body, rows);
    } else {
      write_convergence_json(body, rows);
    }
  } else {
    ResultTable table;
    if (cfg.mode == Mode::tjm) {
      const EnsembleResult r = run_ensemble(cfg.plan, workers);
      rep.completed = r.completed;
      rep.aborted = r.aborted;
      stats = {{"completed", r.completed},
               {"aborted", r.aborted},
               {"jumps", r.total_jumps},
               {"delta_p_warnings", r.delta_p_warnings}};
      table = to_table(r);
    } else if (cfg.mode == Mode::mcwf_dense) {
      table = mcwf_dense_ensemble(cfg.plan, workers);
      rep.completed = cfg.plan.trajectories;
    } else {
      table = lindblad_reference(cfg.plan);
    }
    if (cfg.format == OutputFormat::csv) {
      write_results_csv(body, table);
    } else {
      write_results_json(body, table);
    }
  }
  write_file(rep.results_path, body.str());

  const json manifest = {{"version", TJM_GIT_DESCRIBE},
                         {"master_seed", cfg.plan.master_seed},
                         {"config", cfg.resolved},
                         {"results", rep.results_path},
                         {"statistics", stats},
                         {"runtime", {{"timestamp", utc_timestamp()}, {"workers", workers}}}};
  write_file(rep.manifest_path, manifest.dump(2) + "\n");
  return rep;
}

std::string error_class(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const PreconditionError*>(&e))
    return "config";
  if (dynamic_cast<const ResourceError*>(&e)) return "resource";
  if (dynamic_cast<const EnsembleAbortError*>(&e)) return "aborts";
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DegenerateStateError*>(&e)) return "numeric";
  return "internal";
}

int exit_code_for(const std::exception& e) {
  const std::string c = error_class(e);
  if (c == "config") return 2;
  if (c == "resource") return 3;
  if (c == "aborts") return 4;
  return 1;
}

}  // namespace tjm
