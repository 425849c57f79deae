#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "tjm/mpo.hpp"
#include "tjm/mps.hpp"
#include "tjm/noise.hpp"
#include "tjm/rng.hpp"

namespace tjm {

inline constexpr std::size_t max_lindblad_sites = 7;
inline constexpr std::size_t max_mcwf_sites = 10;
inline constexpr std::size_t max_expm_dim = 4096;

/// op on `site` of an L-site spin-1/2 chain (site 0 most significant).
Eigen::MatrixXcd embed_site(const LocalOp& op, std::size_t site, std::size_t length);
/// op_a on site, op_b on site + 1.
Eigen::MatrixXcd embed_pair(const LocalOp& op_a, const LocalOp& op_b, std::size_t site, std::size_t length);

/// Scaling-and-squaring Pade exponential (dim <= 4096).
Eigen::MatrixXcd dense_expm(const Eigen::MatrixXcd& m);

/// Density matrix of a pure state.
Eigen::MatrixXcd pure_density(const Eigen::VectorXcd& v);

/// rho(j dt) for j = 0..n, n = T / dt, integrating
///   d rho / dt = -i [H, rho] + sum_m gamma_m (L rho L^dagger - {L^dagger L, rho} / 2)
/// with RK4 on a substep dt / substeps; rho is symmetrized after every substep.
std::vector<Eigen::MatrixXcd> lindblad_solve(const Eigen::MatrixXcd& h, const NoiseModel& noise,
                                             const Eigen::MatrixXcd& rho0, double dt, double total_time,
                                             int substeps = 10);

/// Dense first-order Monte Carlo wave function trajectories. Jump
/// probabilities dt gamma_m <L^dagger L> are taken on psi(t); a jump replaces
/// psi(t) by the normalized L_m psi(t), otherwise psi is propagated with
/// exp(-i H_eff dt) and normalized.
class DenseMcwf {
 public:
  DenseMcwf(const Eigen::MatrixXcd& h, const NoiseModel& noise, double dt);

  struct Trajectory {
    std::vector<Eigen::VectorXcd> states;  ///< psi(j dt), j = 0..n
    std::vector<std::pair<std::size_t, std::size_t>> jumps;  ///< (step, operator index)
  };

  Trajectory run(const Eigen::VectorXcd& psi0, std::size_t steps, TrajectoryRng& rng) const;
  /// One step; returns the jumped operator index or -1.
  long step(Eigen::VectorXcd& psi, TrajectoryRng& rng) const;

 private:
  double dt_;
  std::vector<Eigen::MatrixXcd> ops_;       ///< sqrt(gamma) L, embedded
  std::vector<Eigen::MatrixXcd> weights_;   ///< gamma L^dagger L, embedded
  Eigen::MatrixXcd propagator_;             ///< exp(-i H_eff dt)
};

DenseMcwf::Trajectory mcwf_trajectory(const Eigen::MatrixXcd& h, const NoiseModel& noise,
                                      const Eigen::VectorXcd& psi0, double dt, double total_time,
                                      TrajectoryRng& rng);

/// |(I - P) H psi| for the normalized psi, with P the one-site tangent
/// projector sum_l K_l - sum_l G_l built densely from the left- and
/// right-canonical partial states. L <= 10.
double projection_error(const Mps& psi, const Mpo& h);

/// Dense one-site tangent projector itself (same guard).
Eigen::MatrixXcd tangent_projector(const Mps& psi);

}  // namespace tjm
