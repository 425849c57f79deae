#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "tjm/mps.hpp"
#include "tjm/noise.hpp"
#include "tjm/rng.hpp"

namespace tjm {

inline constexpr double delta_p_warn_threshold = 0.1;

struct JumpDecision {
  double delta_p = 0.0;
  std::optional<std::size_t> jump;   ///< operator index into NoiseModel::jumps
  std::vector<double> probabilities;  ///< Pi_m, filled only when a jump happened
  double epsilon_used = 0.0;
  /// sum_m dt gamma_m <L_m^dagger L_m> / delta_p before renormalization
  double raw_probability_sum = 0.0;
  bool delta_p_warning = false;
};

/// 1 - |phi|^2 read off the center tensor. phi must have its center at L-1.
double compute_delta_p(const Mps& phi);

/// Pi_m = dt gamma_m <L_m^dagger L_m> / delta_p from a left-to-right sweep of
/// the center, renormalized to sum 1. `raw_sum` receives the sum before
/// renormalization.
std::vector<double> compute_jump_distribution(const Mps& phi, const NoiseModel& noise, double dt, double delta_p,
                                              double* raw_sum = nullptr);

/// Index m with cumulative(Pi)_{m-1} <= u < cumulative(Pi)_m, skipping zero entries.
std::size_t select_jump(const std::vector<double>& probabilities, double u);

/// Jump map with fixed draws: epsilon decides jump vs no jump, selector_u
/// picks the channel. The result has unit norm; the no-jump branch leaves the
/// center at L-1, the jump branch at 0.
std::pair<Mps, JumpDecision> stochastic_step(Mps phi, const NoiseModel& noise, double dt, double epsilon,
                                             double selector_u, double normalize_threshold = 1e-12);

/// Same, drawing epsilon (and selector_u only when a jump happens) from rng.
/// A noise-free model returns the normalized state without consuming draws.
std::pair<Mps, JumpDecision> stochastic_step(Mps phi, const NoiseModel& noise, double dt, TrajectoryRng& rng,
                                             double normalize_threshold = 1e-12);

}  // namespace tjm
