#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tjm/tensor.hpp"

namespace tjm {

/// Local d x d operator acting on one site.
using LocalOp = Eigen::MatrixXcd;

/// Dense guard for to_dense / from_dense: at most 2^14 amplitudes.
inline constexpr std::size_t max_dense_amplitudes = std::size_t{1} << 14;

/// Finite open-boundary matrix product state.
///
/// Site tensors are shaped (d, chi_left, chi_right) with chi = 1 on both
/// boundaries. Basis ordering of the dense vector puts site 0 in the most
/// significant position, so |s_0 s_1 ... s_{L-1}> has index sum s_l d^{L-1-l}.
/// Physical index 0 is |0> = (1, 0)^T.
///
/// `center()` records the orthogonality center when the state is known to be
/// in mixed canonical form; any direct site mutation clears it.
class Mps {
 public:
  Mps() = default;
  explicit Mps(std::vector<Tensor> sites, std::optional<std::size_t> center = std::nullopt);

  static Mps product_state(std::span<const std::size_t> basis_indices, std::size_t d);
  static Mps product_state(std::initializer_list<std::size_t> basis_indices, std::size_t d) {
    return product_state(std::span<const std::size_t>(basis_indices.begin(), basis_indices.size()), d);
  }
  /// Successive-SVD decomposition of a dense vector of length d^L (lossless).
  static Mps from_dense(const Eigen::VectorXcd& v, std::size_t length, std::size_t d);
  /// Random state with the given uniform bond cap (not normalized).
  static Mps random(std::size_t length, std::size_t d, std::size_t chi, std::mt19937_64& rng);

  std::size_t length() const noexcept { return sites_.size(); }
  std::size_t phys_dim() const { return sites_.front().extent(0); }
  const Tensor& site(std::size_t l) const { return sites_.at(l); }
  const std::vector<Tensor>& sites() const noexcept { return sites_; }

  /// Replaces a site tensor. Bond extents must stay consistent with the neighbors.
  void set_site(std::size_t l, Tensor t, std::optional<std::size_t> center = std::nullopt);

  std::optional<std::size_t> center() const noexcept { return center_; }
  void set_center(std::optional<std::size_t> c) { center_ = c; }

  /// Bond extents chi_0 .. chi_L (L + 1 entries, both ends equal 1).
  std::vector<std::size_t> bond_dims() const;
  std::size_t max_bond() const;

  Eigen::VectorXcd to_dense() const;

  /// QR sweeps from both ends so that the orthogonality center sits at `c`.
  void move_center(std::size_t c);
  /// Multiplies the center tensor (or site 0 when no center is known).
  void scale(cplx s);

 private:
  void check_bonds() const;

  std::vector<Tensor> sites_;
  std::optional<std::size_t> center_;
};

Mps canonicalize(Mps psi, std::size_t center);

cplx inner_product(const Mps& a, const Mps& b);
double norm(const Mps& psi);

/// <psi|op_site|psi> for a Hermitian op on a normalized state.
double local_expectation(const Mps& psi, const LocalOp& op, std::size_t site);
/// <psi|opA_site opB_{site+1}|psi> for Hermitian ops.
double two_site_correlator(const Mps& psi, const LocalOp& op_a, const LocalOp& op_b, std::size_t site);

/// Applies op to one site tensor. Bond extents are unchanged; canonical
/// metadata is kept only for unitary diagonal ops.
Mps apply_single_site(Mps psi, const LocalOp& op, std::size_t site);

/// Normalizes through a left-to-right QR sweep followed by a right-to-left
/// SVD sweep. On each bond the smallest singular values are dropped while their
/// relative squared weight stays at or below threshold^2. Returns a
/// right-canonical state (center 0) with unit norm.
Mps normalize_svd_sweep(Mps psi, double threshold);

/// Left-canonical residual max|A^dagger A - I| of one site tensor.
double left_canonical_error(const Tensor& site);
/// Right-canonical residual max|B B^dagger - I| of one site tensor.
double right_canonical_error(const Tensor& site);

/// Applies op (d x d) to the physical axis of a site tensor.
Tensor apply_to_site(const LocalOp& op, const Tensor& site);

}  // namespace tjm
