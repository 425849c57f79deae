#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tjm/errors.hpp"
#include "tjm/mpo.hpp"
#include "tjm/mps.hpp"
#include "tjm/operators.hpp"
#include "tjm/tdvp.hpp"

using namespace tjm;

namespace {

Mps random_normalized(std::size_t length, std::size_t chi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mps psi = canonicalize(Mps::random(length, 2, chi, rng), 0);
  psi.scale(1.0 / norm(psi));
  return psi;
}

void expect_canonical(const Mps& psi, std::size_t center, double tol) {
  for (std::size_t l = 0; l < center; ++l) EXPECT_LE(left_canonical_error(psi.site(l)), tol) << "site " << l;
  for (std::size_t l = center + 1; l < psi.length(); ++l)
    EXPECT_LE(right_canonical_error(psi.site(l)), tol) << "site " << l;
}

}  // namespace

TEST(ProductState, TwoSitesAllZero) {
  Mps psi = Mps::product_state({0, 0}, 2);
  Eigen::VectorXcd v = psi.to_dense();
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v(0), cplx(1.0));
  EXPECT_EQ(v.norm(), 1.0);
  EXPECT_EQ(psi.max_bond(), 1u);
}

TEST(ProductState, DomainWallIndexThree) {
  Mps psi = Mps::product_state({0, 0, 1, 1}, 2);
  Eigen::VectorXcd v = psi.to_dense();
  for (Eigen::Index i = 0; i < 16; ++i) EXPECT_EQ(v(i), cplx(i == 3 ? 1.0 : 0.0));
}

TEST(ProductState, LongDomainWallProfile) {
  std::vector<std::size_t> bits(30, 0);
  for (std::size_t l = 15; l < 30; ++l) bits[l] = 1;
  Mps psi = Mps::product_state(std::span<const std::size_t>(bits), 2);
  for (std::size_t l = 0; l < 30; ++l)
    EXPECT_NEAR(local_expectation(psi, ops::pauli_z(), l), l < 15 ? 1.0 : -1.0, 1e-14);
}

TEST(ProductState, IndexOutOfRangeThrows) {
  EXPECT_THROW(Mps::product_state({0, 2}, 2), DimensionError);
}

TEST(Canonicalize, ProductStateUnchanged) {
  Mps psi = Mps::product_state({0, 1, 1, 0}, 2);
  for (std::size_t c = 0; c < 4; ++c) {
    Mps q = canonicalize(psi, c);
    for (std::size_t l = 0; l < 4; ++l) {
      // Unit tensors up to a phase.
      EXPECT_NEAR(std::abs(q.site(l)(psi.site(l)(0, 0, 0) == cplx(1.0) ? 0 : 1, 0, 0)), 1.0, 1e-14);
    }
  }
}

TEST(Canonicalize, IdempotentAndCanonical) {
  std::mt19937_64 rng(3);
  Mps psi = Mps::random(6, 2, 4, rng);
  Mps a = canonicalize(psi, 3);
  expect_canonical(a, 3, 1e-10);
  Mps b = canonicalize(a, 3);
  for (std::size_t l = 0; l < 6; ++l) EXPECT_LE(max_abs_diff(a.site(l), b.site(l)), 1e-12);
}

TEST(Canonicalize, PreservesDenseVector) {
  std::mt19937_64 rng(4);
  Mps psi = Mps::random(7, 2, 5, rng);
  const Eigen::VectorXcd before = oracle::amplitudes(psi);
  for (std::size_t c : {0u, 2u, 6u}) {
    Mps q = canonicalize(psi, c);
    expect_canonical(q, c, 1e-10);
    EXPECT_LE((oracle::amplitudes(q) - before).cwiseAbs().maxCoeff(), 1e-10 * before.norm());
  }
}

TEST(ToDense, MatchesBruteForceAmplitudes) {
  std::mt19937_64 rng(5);
  Mps psi = Mps::random(6, 2, 3, rng);
  EXPECT_LE((psi.to_dense() - oracle::amplitudes(psi)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ToDense, GuardedAtFifteenSites) {
  Mps psi = Mps::product_state(std::vector<std::size_t>(15, 0), 2);
  EXPECT_THROW(psi.to_dense(), ResourceError);
}

TEST(FromDense, RoundTrip) {
  std::mt19937_64 rng(6);
  for (std::size_t length : {1u, 3u, 6u, 10u}) {
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << length);
    Eigen::VectorXcd v = oracle::random_vector(dim, rng);
    Mps psi = Mps::from_dense(v, length, 2);
    EXPECT_LE((oracle::amplitudes(psi) - v).cwiseAbs().maxCoeff(), 1e-10 * v.norm()) << length;
    expect_canonical(psi, length - 1, 1e-10);
  }
}

TEST(InnerProduct, BasisStates) {
  Mps a = Mps::product_state({0, 0, 0, 0}, 2);
  Mps b = Mps::product_state({0, 0, 0, 1}, 2);
  EXPECT_NEAR(std::abs(inner_product(a, a) - cplx(1.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(inner_product(a, b)), 0.0, 1e-15);
}

TEST(InnerProduct, RandomPairMatchesDense) {
  std::mt19937_64 rng(7);
  Mps a = Mps::random(8, 2, 4, rng);
  Mps b = Mps::random(8, 2, 3, rng);
  const cplx want = oracle::amplitudes(a).dot(oracle::amplitudes(b));
  EXPECT_LE(std::abs(inner_product(a, b) - want), 1e-10 * std::abs(want) + 1e-12);
  EXPECT_THROW(inner_product(a, Mps::product_state({0, 0}, 2)), DimensionError);
}

TEST(LocalExpectation, SingleQubit) {
  Mps zero = Mps::product_state({0}, 2);
  EXPECT_NEAR(local_expectation(zero, ops::pauli_z(), 0), 1.0, 1e-15);
  EXPECT_NEAR(local_expectation(zero, ops::pauli_x(), 0), 0.0, 1e-15);
}

TEST(LocalExpectation, RejectsNonHermitian) {
  Mps zero = Mps::product_state({0}, 2);
  EXPECT_THROW(local_expectation(zero, ops::lowering(), 0), PreconditionError);
}

TEST(LocalExpectation, RandomStateMatchesDense) {
  Mps psi = random_normalized(6, 4, 8);
  const Eigen::VectorXcd v = oracle::amplitudes(psi);
  for (std::size_t l = 0; l < 6; ++l) {
    const double want = v.dot(oracle::on_site(oracle::pauli_x(), l, 6) * v).real();
    EXPECT_NEAR(local_expectation(psi, ops::pauli_x(), l), want, 1e-10);
  }
}

TEST(LocalExpectation, TfimEvolvedStateMatchesDense) {
  // gamma = 0, L = 10, Jt = 1 with unbounded bonds.
  const std::size_t length = 10;
  Mps psi = Mps::product_state(std::vector<std::size_t>(length, 0), 2);
  const Mpo h = build_hamiltonian({Model::tfim, length, 1.0, 1.0});
  TdvpConfig cfg;
  cfg.svd_threshold = 1e-12;
  for (int k = 0; k < 20; ++k) psi = dynamic_tdvp_step(std::move(psi), h, 0.05, cfg);
  Eigen::VectorXcd v0 = Eigen::VectorXcd::Zero(1 << length);
  v0(0) = 1.0;
  const Eigen::VectorXcd v = oracle::expm_hermitian_apply(oracle::tfim(length, 1.0, 1.0), cplx(0, -1.0), v0);
  const double want = v.dot(oracle::on_site(oracle::pauli_x(), 4, length) * v).real();
  EXPECT_NEAR(local_expectation(psi, ops::pauli_x(), 4), want, 1e-8);
}

TEST(TwoSiteCorrelator, ProductState) {
  Mps psi = Mps::product_state({0, 0}, 2);
  EXPECT_NEAR(two_site_correlator(psi, ops::pauli_z(), ops::pauli_z(), 0), 1.0, 1e-15);
  EXPECT_NEAR(two_site_correlator(psi, ops::pauli_x(), ops::pauli_x(), 0), 0.0, 1e-15);
}

TEST(TwoSiteCorrelator, RandomStateMatchesDense) {
  Mps psi = random_normalized(6, 4, 9);
  const Eigen::VectorXcd v = oracle::amplitudes(psi);
  for (std::size_t l = 0; l + 1 < 6; ++l) {
    const double want = v.dot(oracle::on_pair(oracle::pauli_x(), oracle::pauli_y(), l, 6) * v).real();
    EXPECT_NEAR(two_site_correlator(psi, ops::pauli_x(), ops::pauli_y(), l), want, 1e-10);
  }
}

TEST(GaugeInvariance, ExpectationsIndependentOfCenter) {
  Mps psi = random_normalized(6, 4, 10);
  const double ref = local_expectation(psi, ops::pauli_y(), 2);
  const double ref2 = two_site_correlator(psi, ops::pauli_z(), ops::pauli_x(), 3);
  for (std::size_t c = 0; c < 6; ++c) {
    Mps q = canonicalize(psi, c);
    EXPECT_NEAR(local_expectation(q, ops::pauli_y(), 2), ref, 1e-10);
    EXPECT_NEAR(two_site_correlator(q, ops::pauli_z(), ops::pauli_x(), 3), ref2, 1e-10);
  }
}

TEST(ApplySingleSite, IdentityLeavesState) {
  Mps psi = random_normalized(5, 3, 11);
  Mps q = apply_single_site(psi, ops::identity(2), 2);
  for (std::size_t l = 0; l < 5; ++l) EXPECT_EQ(max_abs_diff(psi.site(l), q.site(l)), 0.0);
  EXPECT_EQ(q.center(), psi.center());
}

TEST(ApplySingleSite, LoweringOnFirstSite) {
  Mps psi = Mps::product_state({1, 1, 1, 1}, 2);
  Mps q = apply_single_site(psi, ops::lowering(), 0);
  const Eigen::VectorXcd v = q.to_dense();
  for (Eigen::Index i = 0; i < 16; ++i) EXPECT_EQ(v(i), cplx(i == 7 ? 1.0 : 0.0));  // |0111>
  EXPECT_FALSE(q.center().has_value());
}

TEST(ApplySingleSite, RandomOpMatchesDense) {
  std::mt19937_64 rng(12);
  Mps psi = Mps::random(5, 2, 3, rng);
  const Eigen::MatrixXcd op = oracle::random_vector(4, rng).reshaped(2, 2);
  for (std::size_t l = 0; l < 5; ++l) {
    Mps q = apply_single_site(psi, op, l);
    EXPECT_EQ(q.bond_dims(), psi.bond_dims());
    const Eigen::VectorXcd want = oracle::on_site(op, l, 5) * oracle::amplitudes(psi);
    EXPECT_LE((oracle::amplitudes(q) - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ApplySingleSite, UnitaryDiagonalKeepsCenter) {
  Mps psi = random_normalized(4, 2, 13);
  Mps q = apply_single_site(psi, ops::pauli_z(), 2);
  EXPECT_EQ(q.center(), psi.center());
}

TEST(NormalizeSvdSweep, NormalizedProductUnchanged) {
  Mps psi = Mps::product_state({0, 1, 0}, 2);
  Mps q = normalize_svd_sweep(psi, 1e-12);
  EXPECT_NEAR(std::abs(inner_product(psi, q)), 1.0, 1e-14);
  EXPECT_EQ(q.max_bond(), 1u);
  EXPECT_NEAR(norm(q), 1.0, 1e-14);
}

TEST(NormalizeSvdSweep, ScaledStateKeepsDirection) {
  Mps psi = random_normalized(6, 4, 14);
  Mps scaled = psi;
  scaled.scale(3.7);
  Mps q = normalize_svd_sweep(scaled, 1e-12);
  EXPECT_NEAR(std::sqrt(std::max(0.0, inner_product(q, q).real())), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(inner_product(psi, q)), 1.0, 1e-12);
  EXPECT_EQ(q.center(), std::optional<std::size_t>{0});
  for (std::size_t l = 1; l < 6; ++l) EXPECT_LE(right_canonical_error(q.site(l)), 1e-10);
  const auto b0 = psi.bond_dims();
  const auto b1 = q.bond_dims();
  for (std::size_t i = 0; i < b0.size(); ++i) EXPECT_LE(b1[i], b0[i]);
}

TEST(NormalizeSvdSweep, PaddedBondsShrinkToExactRank) {
  // Embed a product state into bond dimension 3 with zero padding.
  std::vector<Tensor> sites;
  const std::size_t length = 5;
  for (std::size_t l = 0; l < length; ++l) {
    const std::size_t cl = l == 0 ? 1 : 3;
    const std::size_t cr = l + 1 == length ? 1 : 3;
    Tensor t({2, cl, cr});
    t(l % 2, 0, 0) = 2.0;
    sites.push_back(std::move(t));
  }
  Mps padded(std::move(sites));
  EXPECT_EQ(padded.max_bond(), 3u);
  Mps q = normalize_svd_sweep(padded, 1e-12);
  EXPECT_EQ(q.max_bond(), 1u);
  EXPECT_NEAR(norm(q), 1.0, 1e-12);
  EXPECT_NEAR(local_expectation(q, ops::pauli_z(), 1), -1.0, 1e-12);
}

TEST(NormalizeSvdSweep, DiscardedWeightBounded) {
  // Two-site state with a tiny Schmidt value: dropped only when below threshold.
  const double small = 1e-7;
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(4);
  v(0) = 1.0;
  v(3) = small;
  Mps psi = Mps::from_dense(v, 2, 2);
  EXPECT_EQ(normalize_svd_sweep(psi, 1e-6).max_bond(), 1u);
  EXPECT_EQ(normalize_svd_sweep(psi, 1e-8).max_bond(), 2u);
}

TEST(NormalizeSvdSweep, ZeroNormThrows) {
  Mps psi = Mps::product_state({1, 1}, 2);
  Mps zero = apply_single_site(psi, ops::raising(), 0);
  EXPECT_THROW(normalize_svd_sweep(zero, 1e-12), DegenerateStateError);
}
