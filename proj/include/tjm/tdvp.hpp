#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tjm/mpo.hpp"
#include "tjm/mps.hpp"

namespace tjm {

struct TdvpConfig {
  std::size_t chi_max = unbounded_rank;
  double svd_threshold = 1e-10;   ///< relative to the largest singular value
  int lanczos_max_iters = 25;
  double lanczos_tol = 1e-10;
  /// Use one rule for the whole step (2-site if any bond is below chi_max)
  /// instead of deciding bond by bond.
  bool global_switch = false;
};

void validate_tdvp_config(const TdvpConfig& cfg);

/// Partial contractions of <psi|H|psi>. left[l] covers sites 0..l-1 and has
/// shape (chi_l, D_l, chi_l); right[l] covers sites l..L-1. left[0] and
/// right[L] are the trivial (1, 1, 1) ones.
struct EnvironmentCache {
  std::vector<Tensor> left;
  std::vector<Tensor> right;
};

/// Requires a known center c: fills left[0..c] and right[c+1..L].
EnvironmentCache build_environments(const Mps& psi, const Mpo& h);

/// H_eff acting on a site tensor (d, a, b).
Tensor effective_apply_one_site(const Tensor& left, const Tensor& w, const Tensor& right, const Tensor& m);
/// Bond effective Hamiltonian acting on C (a, b).
Tensor effective_apply_bond(const Tensor& left, const Tensor& right, const Tensor& c);
/// Two-site effective Hamiltonian acting on theta (d1, d2, a, c).
Tensor effective_apply_two_site(const Tensor& left, const Tensor& w1, const Tensor& w2, const Tensor& right,
                                const Tensor& theta);

/// Dense matrices of the same maps, row and column index ordered like the
/// row-major flattening of the tensor acted on.
Eigen::MatrixXcd effective_matrix_one_site(const Tensor& left, const Tensor& w, const Tensor& right);
Eigen::MatrixXcd effective_matrix_bond(const Tensor& left, const Tensor& right);
Eigen::MatrixXcd effective_matrix_two_site(const Tensor& left, const Tensor& w1, const Tensor& w2,
                                           const Tensor& right);

/// Local problems up to this dimension are integrated with the dense
/// effective matrix instead of contraction-based products.
inline constexpr std::size_t dense_effective_max_dim = 64;

using LinearMap = std::function<Tensor(const Tensor&)>;

/// exp(prefactor * A) v for Hermitian A by Lanczos with full
/// reorthogonalization. Stops early on breakdown or when the error estimate
/// drops below tol * |v|.
Tensor lanczos_expm_apply(const LinearMap& apply, const Tensor& v, cplx prefactor, int max_iters = 25,
                          double tol = 1e-10);
/// Same iteration with a dense Hermitian matrix.
Eigen::VectorXcd lanczos_expm_apply(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& v, cplx prefactor,
                                    int max_iters = 25, double tol = 1e-10);

enum class TdvpMode { one_site, two_site, dynamic };

/// One symmetric step: left-to-right with dt/2, then right-to-left with dt/2.
/// psi must have its center at site 0 (right-canonical); the result again has
/// center 0.
Mps tdvp_step(Mps psi, const Mpo& h, double dt, const TdvpConfig& cfg, TdvpMode mode);

inline Mps tdvp1_sweep(Mps psi, const Mpo& h, double dt, const TdvpConfig& cfg) {
  return tdvp_step(std::move(psi), h, dt, cfg, TdvpMode::one_site);
}
inline Mps tdvp2_sweep(Mps psi, const Mpo& h, double dt, const TdvpConfig& cfg) {
  return tdvp_step(std::move(psi), h, dt, cfg, TdvpMode::two_site);
}
/// Bond with chi < chi_max: two-site update (may grow past chi_max, at most
/// d * chi per step). Otherwise one-site update plus backward bond step.
inline Mps dynamic_tdvp_step(Mps psi, const Mpo& h, double dt, const TdvpConfig& cfg) {
  return tdvp_step(std::move(psi), h, dt, cfg, TdvpMode::dynamic);
}

}  // namespace tjm
