#include "tjm/mps.hpp"

#include <algorithm>
#include <cmath>

#include "tjm/errors.hpp"

namespace tjm {

namespace {

std::size_t checked_dense_size(std::size_t length, std::size_t d) {
  std::size_t n = 1;
  for (std::size_t l = 0; l < length; ++l) {
    n *= d;
    if (n > max_dense_amplitudes)
      throw ResourceError("dense conversion limited to " + std::to_string(max_dense_amplitudes) +
                          " amplitudes");
  }
  return n;
}

// Moves the center from site l to l + 1 by a QR of site l.
void shift_right(std::vector<Tensor>& sites, std::size_t l) {
  auto [q, r] = qr_split(sites[l], {0, 1});
  sites[l] = std::move(q);
  sites[l + 1] = contract(r, sites[l + 1], {{1, 1}}).permuted({1, 0, 2});
}

// Moves the center from site l to l - 1 by an LQ of site l.
void shift_left(std::vector<Tensor>& sites, std::size_t l) {
  auto [q, r] = qr_split(sites[l], {0, 2});  // q: (d, chi_r, k), r: (k, chi_l)
  sites[l] = q.permuted({0, 2, 1});
  sites[l - 1] = contract(sites[l - 1], r, {{2, 1}});
}

bool is_unitary_diagonal(const LocalOp& op) {
  for (Eigen::Index i = 0; i < op.rows(); ++i)
    for (Eigen::Index j = 0; j < op.cols(); ++j) {
      if (i == j) {
        if (std::abs(std::abs(op(i, j)) - 1.0) > 1e-14) return false;
      } else if (op(i, j) != cplx{0.0}) {
        return false;
      }
    }
  return true;
}

void require_hermitian(const LocalOp& op, const char* who) {
  const double scale = std::max(1.0, op.norm());
  if ((op - op.adjoint()).norm() > 1e-10 * scale)
    throw PreconditionError(std::string(who) + ": operator is not Hermitian");
}

}  // namespace

Tensor apply_to_site(const LocalOp& op, const Tensor& site) {
  const std::size_t d = site.extent(0);
  if (static_cast<std::size_t>(op.rows()) != d || static_cast<std::size_t>(op.cols()) != d)
    throw DimensionError("apply_to_site: operator must be " + std::to_string(d) + "x" +
                         std::to_string(d));
  Tensor out(site.shape());
  out.as_matrix(d).noalias() = op * site.as_matrix(d);
  return out;
}

Mps::Mps(std::vector<Tensor> sites, std::optional<std::size_t> center)
    : sites_(std::move(sites)), center_(center) {
  if (sites_.empty()) throw DimensionError("mps: at least one site required");
  check_bonds();
  if (center_ && *center_ >= sites_.size()) throw DimensionError("mps: center out of range");
}

void Mps::check_bonds() const {
  const std::size_t d = sites_.front().rank() == 3 ? sites_.front().extent(0) : 0;
  for (std::size_t l = 0; l < sites_.size(); ++l) {
    const Tensor& t = sites_[l];
    if (t.rank() != 3 || t.extent(0) != d)
      throw DimensionError("mps: site " + std::to_string(l) + " must be (d, chi_l, chi_r)");
    if (l + 1 < sites_.size() && t.extent(2) != sites_[l + 1].extent(1))
      throw DimensionError("mps: bond mismatch between sites " + std::to_string(l) + " and " +
                           std::to_string(l + 1));
  }
  if (sites_.front().extent(1) != 1 || sites_.back().extent(2) != 1)
    throw DimensionError("mps: boundary bonds must have extent 1");
}

Mps Mps::product_state(std::span<const std::size_t> basis_indices, std::size_t d) {
  if (basis_indices.empty()) throw DimensionError("product_state: empty chain");
  if (d == 0) throw DimensionError("product_state: d must be positive");
  std::vector<Tensor> sites;
  sites.reserve(basis_indices.size());
  for (auto s : basis_indices) {
    if (s >= d)
      throw DimensionError("product_state: basis index " + std::to_string(s) + " outside [0, " +
                           std::to_string(d) + ")");
    Tensor t({d, 1, 1});
    t(s, 0, 0) = 1.0;
    sites.push_back(std::move(t));
  }
  // A product of unit vectors is canonical around every site.
  return Mps(std::move(sites), 0);
}

Mps Mps::from_dense(const Eigen::VectorXcd& v, std::size_t length, std::size_t d) {
  const std::size_t n = checked_dense_size(length, d);
  if (static_cast<std::size_t>(v.size()) != n) throw DimensionError("from_dense: vector length is not d^L");
  std::vector<Tensor> sites;
  std::vector<cplx> data(v.data(), v.data() + v.size());
  Tensor rest({1, n}, std::move(data));
  for (std::size_t l = 0; l + 1 < length; ++l) {
    const std::size_t chi = rest.extent(0);
    const std::size_t cols = rest.size() / (chi * d);
    Tensor m = std::move(rest).reshaped({chi, d, cols});
    auto split = svd_split(m, {0, 1});
    sites.push_back(split.u.permuted({1, 0, 2}));
    const std::size_t k = split.singular_values.size();
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < cols; ++j) split.vh(i, j) *= split.singular_values[i];
    rest = std::move(split.vh);
  }
  const std::size_t chi = rest.extent(0);
  sites.push_back(std::move(rest).reshaped({chi, d, 1}).permuted({1, 0, 2}));
  return Mps(std::move(sites), length - 1);
}

Mps Mps::random(std::size_t length, std::size_t d, std::size_t chi, std::mt19937_64& rng) {
  std::vector<std::size_t> bonds(length + 1, 1);
  for (std::size_t l = 1; l < length; ++l) {
    std::size_t left = 1, right = 1;
    for (std::size_t i = 0; i < l && left < chi; ++i) left *= d;
    for (std::size_t i = l; i < length && right < chi; ++i) right *= d;
    bonds[l] = std::min({chi, left, right});
  }
  std::vector<Tensor> sites;
  for (std::size_t l = 0; l < length; ++l) sites.push_back(Tensor::random({d, bonds[l], bonds[l + 1]}, rng));
  return Mps(std::move(sites));
}

void Mps::set_site(std::size_t l, Tensor t, std::optional<std::size_t> center) {
  sites_.at(l) = std::move(t);
  check_bonds();
  center_ = center;
}

std::vector<std::size_t> Mps::bond_dims() const {
  std::vector<std::size_t> out;
  out.reserve(sites_.size() + 1);
  out.push_back(sites_.front().extent(1));
  for (const auto& t : sites_) out.push_back(t.extent(2));
  return out;
}

std::size_t Mps::max_bond() const {
  const auto b = bond_dims();
  return *std::max_element(b.begin(), b.end());
}

Eigen::VectorXcd Mps::to_dense() const {
  const std::size_t d = phys_dim();
  const std::size_t n = checked_dense_size(length(), d);
  Tensor acc = sites_[0].reshaped({d, sites_[0].extent(2)});
  for (std::size_t l = 1; l < sites_.size(); ++l) {
    Tensor next = contract(acc, sites_[l], {{1, 1}});
    const std::size_t chi = sites_[l].extent(2);
    acc = std::move(next).reshaped({next.size() / chi, chi});
  }
  Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = acc.data()[i];
  return v;
}

void Mps::move_center(std::size_t c) {
  if (c >= sites_.size()) throw DimensionError("move_center: site out of range");
  if (center_) {
    for (std::size_t l = *center_; l < c; ++l) shift_right(sites_, l);
    for (std::size_t l = *center_; l > c; --l) shift_left(sites_, l);
  } else {
    for (std::size_t l = 0; l < c; ++l) shift_right(sites_, l);
    for (std::size_t l = sites_.size() - 1; l > c; --l) shift_left(sites_, l);
  }
  center_ = c;
}

void Mps::scale(cplx s) { sites_[center_.value_or(0)] *= s; }

Mps canonicalize(Mps psi, std::size_t center) {
  psi.move_center(center);
  return psi;
}

cplx inner_product(const Mps& a, const Mps& b) {
  if (a.length() != b.length() || a.phys_dim() != b.phys_dim())
    throw DimensionError("inner_product: states differ in length or physical dimension");
  Tensor env({1, 1}, {cplx{1.0}});
  for (std::size_t l = 0; l < a.length(); ++l) {
    Tensor t = contract(env, b.site(l), {{1, 1}});                // (a, s, b')
    env = contract(a.site(l).conj(), t, {{0, 1}, {1, 0}});        // (a', b')
  }
  return env.data()[0];
}

double norm(const Mps& psi) {
  if (psi.center()) return psi.site(*psi.center()).norm();
  return std::sqrt(std::max(0.0, inner_product(psi, psi).real()));
}

double local_expectation(const Mps& psi, const LocalOp& op, std::size_t site) {
  require_hermitian(op, "local_expectation");
  if (site >= psi.length()) throw DimensionError("local_expectation: site out of range");
  Mps work = canonicalize(psi, site);
  const Tensor& m = work.site(site);
  const Tensor om = apply_to_site(op, m);
  cplx num = m.as_vector().dot(om.as_vector());  // conjugates the first argument
  return num.real() / m.as_vector().squaredNorm();
}

double two_site_correlator(const Mps& psi, const LocalOp& op_a, const LocalOp& op_b, std::size_t site) {
  require_hermitian(op_a, "two_site_correlator");
  require_hermitian(op_b, "two_site_correlator");
  if (site + 1 >= psi.length()) throw DimensionError("two_site_correlator: site out of range");
  Mps work = canonicalize(psi, site);
  Tensor theta = contract(work.site(site), work.site(site + 1), {{2, 1}});  // (s1, a, s2, c)
  Tensor t1 = apply_to_site(op_a, theta);
  Tensor t2 = contract(t1, Tensor::from_matrix(op_b), {{2, 1}}).permuted({0, 1, 3, 2});
  const cplx num = theta.as_vector().dot(t2.as_vector());
  return num.real() / theta.as_vector().squaredNorm();
}

Mps apply_single_site(Mps psi, const LocalOp& op, std::size_t site) {
  if (site >= psi.length()) throw DimensionError("apply_single_site: site out of range");
  const auto center = psi.center();
  Tensor t = apply_to_site(op, psi.site(site));
  psi.set_site(site, std::move(t), is_unitary_diagonal(op) ? center : std::nullopt);
  return psi;
}

Mps normalize_svd_sweep(Mps psi, double threshold) {
  const std::size_t n = psi.length();
  psi.move_center(n - 1);
  if (psi.site(n - 1).norm() == 0.0) throw DegenerateStateError("normalize_svd_sweep: zero-norm state");

  std::vector<Tensor> sites = psi.sites();
  const double max_drop = threshold * threshold;
  for (std::size_t l = n - 1; l > 0; --l) {
    auto split = svd_split(sites[l], {1});  // u: (chi_l, k), vh: (k, d, chi_r)
    const auto& s = split.singular_values;
    double total = 0.0;
    for (double v : s) total += v * v;
    std::size_t keep = s.size();
    double dropped = 0.0;
    while (keep > 1 && dropped + s[keep - 1] * s[keep - 1] <= max_drop * total) {
      dropped += s[keep - 1] * s[keep - 1];
      --keep;
    }
    Tensor u({split.u.extent(0), keep});
    for (std::size_t i = 0; i < u.extent(0); ++i)
      for (std::size_t k = 0; k < keep; ++k) u(i, k) = split.u(i, k) * s[k];
    Tensor vh = keep == s.size() ? std::move(split.vh)
                                 : Tensor({keep, split.vh.extent(1), split.vh.extent(2)},
                                          std::vector<cplx>(split.vh.data(), split.vh.data() + keep *
                                                                                 split.vh.extent(1) *
                                                                                 split.vh.extent(2)));
    sites[l] = vh.permuted({1, 0, 2});
    sites[l - 1] = contract(sites[l - 1], u, {{2, 0}});
  }
  const double nrm = sites[0].norm();
  if (nrm == 0.0) throw DegenerateStateError("normalize_svd_sweep: zero-norm state after truncation");
  sites[0] *= cplx{1.0 / nrm};
  return Mps(std::move(sites), 0);
}

double left_canonical_error(const Tensor& site) {
  const std::size_t chi_r = site.extent(2);
  const auto m = site.as_matrix(site.size() / chi_r);
  const Eigen::MatrixXcd g = m.adjoint() * m;
  return (g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double right_canonical_error(const Tensor& site) {
  const Tensor p = site.permuted({1, 0, 2});
  const auto m = p.as_matrix(p.extent(0));
  const Eigen::MatrixXcd g = m * m.adjoint();
  return (g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

}  // namespace tjm
