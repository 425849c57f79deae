#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tjm/mps.hpp"
#include "tjm/tensor.hpp"

namespace tjm {

/// Finite open-boundary matrix product operator. Site tensors are shaped
/// (d_out, d_in, D_left, D_right) and represent
///   O = sum W_0[s0, s0'] ... W_{L-1}[s, s'] |s0 ...><s0' ...|.
class Mpo {
 public:
  Mpo() = default;
  explicit Mpo(std::vector<Tensor> sites);

  static Mpo identity(std::size_t length, std::size_t d = 2);

  std::size_t length() const noexcept { return sites_.size(); }
  std::size_t phys_dim() const { return sites_.front().extent(0); }
  const Tensor& site(std::size_t l) const { return sites_.at(l); }
  const std::vector<Tensor>& sites() const noexcept { return sites_; }

  /// D_0 .. D_L.
  std::vector<std::size_t> bond_dims() const;

  /// Dense d^L x d^L matrix; same guard as Mps::to_dense.
  Eigen::MatrixXcd to_dense() const;

 private:
  std::vector<Tensor> sites_;
};

enum class Model { tfim, xxx_heisenberg };

/// Nearest-neighbor spin-1/2 chain with open boundaries.
///   tfim:           H = -J sum Z_i Z_{i+1} - g sum X_i
///   xxx_heisenberg: H = -J sum (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}) - h sum Z_i
struct HamiltonianSpec {
  Model model = Model::tfim;
  std::size_t length = 2;
  double coupling = 1.0;  ///< J
  double field = 1.0;     ///< g (tfim) or h (xxx)
};

Model parse_model(const std::string& name);
std::string model_name(Model m);

/// Finite-state-machine construction: bond dimension 3 (tfim) or 5 (xxx).
Mpo build_hamiltonian(const HamiltonianSpec& spec);

/// Dense Kronecker-sum construction of the same Hamiltonian.
Eigen::MatrixXcd dense_hamiltonian(const HamiltonianSpec& spec);

/// One step of the left environment <bra|O|ket> sandwich.
/// env: (chi_bra, D, chi_ket) on the bond left of the site -> same on its right.
Tensor left_env_step(const Tensor& env, const Tensor& bra_site, const Tensor& w, const Tensor& ket_site);
/// Mirror of left_env_step, from the bond right of the site to its left.
Tensor right_env_step(const Tensor& env, const Tensor& bra_site, const Tensor& w, const Tensor& ket_site);

/// <psi|O|psi> (not divided by the norm).
cplx mpo_expectation(const Mps& psi, const Mpo& op);

/// Default bond budget for density reconstruction (largest allowed D_l).
inline constexpr std::size_t default_density_bond_budget = 4096;

/// rho = (1/N) sum |psi_i><psi_i| with block-diagonal bonds D_l = sum_i chi_{l,i}^2.
Mpo density_from_trajectories(const std::vector<Mps>& states,
                              std::size_t bond_budget = default_density_bond_budget);

}  // namespace tjm
