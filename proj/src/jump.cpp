#include "tjm/jump.hpp"

#include <cmath>

#include "tjm/errors.hpp"

namespace tjm {

namespace {

// <M|op|M> on one site tensor with all other sites canonical.
double site_weight(const Tensor& m, const LocalOp& op) {
  const std::size_t d = m.extent(0);
  const auto mat = m.as_matrix(d);
  return (mat.adjoint() * (op * mat)).trace().real();
}

Mps normalized_no_jump(Mps phi) {
  const double n = norm(phi);
  if (!(n > 0.0)) throw DegenerateStateError("jump: state has zero norm");
  phi.scale(1.0 / n);
  return phi;
}

std::pair<Mps, JumpDecision> decide(Mps phi, const NoiseModel& noise, double dt, double epsilon,
                                    double selector_u, double normalize_threshold, bool draw_selector,
                                    TrajectoryRng* rng) {
  JumpDecision dec;
  if (noise.empty()) return {normalized_no_jump(std::move(phi)), dec};
  validate_noise(noise, phi.length(), phi.phys_dim());

  phi.move_center(phi.length() - 1);
  const double n = norm(phi);
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateStateError("jump: dissipated state has zero norm");
  dec.delta_p = compute_delta_p(phi);
  dec.delta_p_warning = dec.delta_p > delta_p_warn_threshold;
  dec.epsilon_used = epsilon;
  if (epsilon >= dec.delta_p) return {normalized_no_jump(std::move(phi)), dec};

  dec.probabilities = compute_jump_distribution(phi, noise, dt, dec.delta_p, &dec.raw_probability_sum);
  if (draw_selector) selector_u = rng->uniform();
  const std::size_t m = select_jump(dec.probabilities, selector_u);
  dec.jump = m;
  const JumpOperator& j = noise.jumps[m];
  phi = apply_single_site(std::move(phi), std::sqrt(j.gamma) * j.op, j.site);
  return {normalize_svd_sweep(std::move(phi), normalize_threshold), dec};
}

}  // namespace

double compute_delta_p(const Mps& phi) {
  if (phi.center() != std::optional<std::size_t>{phi.length() - 1})
    throw PreconditionError("compute_delta_p: center must be at the last site");
  const double n = phi.site(phi.length() - 1).norm();
  return 1.0 - n * n;
}

std::vector<double> compute_jump_distribution(const Mps& phi, const NoiseModel& noise, double dt, double delta_p,
                                              double* raw_sum) {
  if (!(delta_p > 0.0)) throw PreconditionError("compute_jump_distribution: delta_p must be positive");
  validate_noise(noise, phi.length(), phi.phys_dim());
  std::vector<std::vector<std::size_t>> by_site(phi.length());
  for (std::size_t m = 0; m < noise.jumps.size(); ++m) by_site[noise.jumps[m].site].push_back(m);

  Mps work = canonicalize(phi, 0);
  std::vector<double> pi(noise.jumps.size(), 0.0);
  for (std::size_t l = 0; l < work.length(); ++l) {
    if (l > 0) work.move_center(l);
    for (std::size_t m : by_site[l]) {
      const JumpOperator& j = noise.jumps[m];
      if (j.gamma == 0.0) continue;
      const double w = site_weight(work.site(l), j.op.adjoint() * j.op);
      pi[m] = std::max(0.0, dt * j.gamma * w / delta_p);
    }
  }
  double total = 0.0;
  for (double p : pi) total += p;
  if (raw_sum) *raw_sum = total;
  if (!(total > 0.0) || !std::isfinite(total))
    throw DegenerateStateError("compute_jump_distribution: all jump weights vanish");
  for (double& p : pi) p /= total;
  return pi;
}

std::size_t select_jump(const std::vector<double>& probabilities, double u) {
  if (probabilities.empty()) throw PreconditionError("select_jump: empty distribution");
  double cum = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t m = 0; m < probabilities.size(); ++m) {
    if (probabilities[m] <= 0.0) continue;
    last_nonzero = m;
    cum += probabilities[m];
    if (u < cum) return m;
  }
  return last_nonzero;
}

std::pair<Mps, JumpDecision> stochastic_step(Mps phi, const NoiseModel& noise, double dt, double epsilon,
                                             double selector_u, double normalize_threshold) {
  return decide(std::move(phi), noise, dt, epsilon, selector_u, normalize_threshold, false, nullptr);
}

std::pair<Mps, JumpDecision> stochastic_step(Mps phi, const NoiseModel& noise, double dt, TrajectoryRng& rng,
                                             double normalize_threshold) {
  if (noise.empty()) return decide(std::move(phi), noise, dt, 1.0, 0.0, normalize_threshold, false, nullptr);
  const double epsilon = rng.uniform();
  return decide(std::move(phi), noise, dt, epsilon, 0.0, normalize_threshold, true, &rng);
}

}  // namespace tjm
