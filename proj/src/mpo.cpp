#include "tjm/mpo.hpp"

#include <algorithm>
#include <numeric>

#include "tjm/errors.hpp"
#include "tjm/operators.hpp"

namespace tjm {

namespace {

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// op acting on the given sites (site 0 most significant), identity elsewhere.
Eigen::MatrixXcd embed(std::size_t length, const std::vector<std::pair<std::size_t, LocalOp>>& factors) {
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(1, 1);
  for (std::size_t l = 0; l < length; ++l) {
    LocalOp f = ops::identity(2);
    for (const auto& [site, op] : factors)
      if (site == l) f = op;
    acc = kron(acc, f);
  }
  return acc;
}

// Writes the d x d block `op` into W[:, :, a, b].
void put(Tensor& w, std::size_t a, std::size_t b, const LocalOp& op) {
  for (Eigen::Index i = 0; i < op.rows(); ++i)
    for (Eigen::Index j = 0; j < op.cols(); ++j) w(i, j, a, b) = op(i, j);
}

// Bulk transfer matrix of a nearest-neighbor FSM: state 0 = nothing placed,
// states 1..k = first half of a bond term placed, state k+1 = done.
Tensor fsm_bulk(const std::vector<std::pair<double, LocalOp>>& bond_terms, const LocalOp& onsite) {
  const std::size_t k = bond_terms.size();
  const std::size_t dim = k + 2;
  Tensor w({2, 2, dim, dim});
  const LocalOp id = ops::identity(2);
  put(w, 0, 0, id);
  put(w, dim - 1, dim - 1, id);
  put(w, 0, dim - 1, onsite);
  for (std::size_t i = 0; i < k; ++i) {
    put(w, 0, i + 1, bond_terms[i].first * bond_terms[i].second);
    put(w, i + 1, dim - 1, bond_terms[i].second);
  }
  return w;
}

Mpo fsm_chain(std::size_t length, const Tensor& bulk) {
  const std::size_t dim = bulk.extent(2);
  std::vector<Tensor> sites;
  for (std::size_t l = 0; l < length; ++l) {
    const std::size_t row_lo = l == 0 ? 0 : 0;
    const std::size_t row_n = l == 0 ? 1 : dim;
    const std::size_t col_lo = l + 1 == length ? dim - 1 : 0;
    const std::size_t col_n = l + 1 == length ? 1 : dim;
    Tensor w({2, 2, row_n, col_n});
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t a = 0; a < row_n; ++a)
          for (std::size_t b = 0; b < col_n; ++b) w(i, j, a, b) = bulk(i, j, row_lo + a, col_lo + b);
    sites.push_back(std::move(w));
  }
  return Mpo(std::move(sites));
}

}  // namespace

Mpo::Mpo(std::vector<Tensor> sites) : sites_(std::move(sites)) {
  if (sites_.empty()) throw DimensionError("mpo: at least one site required");
  for (std::size_t l = 0; l < sites_.size(); ++l) {
    const Tensor& w = sites_[l];
    if (w.rank() != 4 || w.extent(0) != w.extent(1) || w.extent(0) != sites_[0].extent(0))
      throw DimensionError("mpo: site " + std::to_string(l) + " must be (d, d, D_l, D_r)");
    if (l + 1 < sites_.size() && w.extent(3) != sites_[l + 1].extent(2))
      throw DimensionError("mpo: bond mismatch after site " + std::to_string(l));
  }
  if (sites_.front().extent(2) != 1 || sites_.back().extent(3) != 1)
    throw DimensionError("mpo: boundary bonds must have extent 1");
}

Mpo Mpo::identity(std::size_t length, std::size_t d) {
  std::vector<Tensor> sites;
  for (std::size_t l = 0; l < length; ++l) {
    Tensor w({d, d, 1, 1});
    for (std::size_t i = 0; i < d; ++i) w(i, i, 0, 0) = 1.0;
    sites.push_back(std::move(w));
  }
  return Mpo(std::move(sites));
}

std::vector<std::size_t> Mpo::bond_dims() const {
  std::vector<std::size_t> out{sites_.front().extent(2)};
  for (const auto& w : sites_) out.push_back(w.extent(3));
  return out;
}

Eigen::MatrixXcd Mpo::to_dense() const {
  const std::size_t d = phys_dim();
  std::size_t n = 1;
  for (std::size_t l = 0; l < length(); ++l) {
    n *= d;
    if (n > max_dense_amplitudes) throw ResourceError("mpo to_dense: operator too large");
  }
  Tensor acc = sites_[0].reshaped({d, d, sites_[0].extent(3)});
  std::size_t rows = d;
  for (std::size_t l = 1; l < length(); ++l) {
    const std::size_t dr = sites_[l].extent(3);
    Tensor t = contract(acc, sites_[l], {{2, 2}}).permuted({0, 2, 1, 3, 4});
    rows *= d;
    acc = std::move(t).reshaped({rows, rows, dr});
  }
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < rows; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc(i, j, 0);
  return m;
}

Model parse_model(const std::string& name) {
  if (name == "tfim") return Model::tfim;
  if (name == "xxx" || name == "xxx_heisenberg") return Model::xxx_heisenberg;
  throw ConfigError("unsupported model '" + name + "' (expected tfim or xxx_heisenberg)");
}

std::string model_name(Model m) { return m == Model::tfim ? "tfim" : "xxx_heisenberg"; }

Mpo build_hamiltonian(const HamiltonianSpec& spec) {
  if (spec.length < 2) throw DimensionError("build_hamiltonian: need at least 2 sites");
  const double j = spec.coupling;
  const double f = spec.field;
  switch (spec.model) {
    case Model::tfim:
      return fsm_chain(spec.length, fsm_bulk({{-j, ops::pauli_z()}}, -f * ops::pauli_x()));
    case Model::xxx_heisenberg:
      return fsm_chain(spec.length,
                       fsm_bulk({{-j, ops::pauli_x()}, {-j, ops::pauli_y()}, {-j, ops::pauli_z()}},
                                -f * ops::pauli_z()));
  }
  throw ConfigError("build_hamiltonian: unknown model");
}

Eigen::MatrixXcd dense_hamiltonian(const HamiltonianSpec& spec) {
  const std::size_t n = spec.length;
  if (n < 2) throw DimensionError("dense_hamiltonian: need at least 2 sites");
  if (n > 14) throw ResourceError("dense_hamiltonian: at most 14 sites");
  const std::size_t dim = std::size_t{1} << n;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  std::vector<LocalOp> bond_ops;
  LocalOp onsite;
  if (spec.model == Model::tfim) {
    bond_ops = {ops::pauli_z()};
    onsite = ops::pauli_x();
  } else {
    bond_ops = {ops::pauli_x(), ops::pauli_y(), ops::pauli_z()};
    onsite = ops::pauli_z();
  }
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (const auto& o : bond_ops) h -= spec.coupling * embed(n, {{i, o}, {i + 1, o}});
  for (std::size_t i = 0; i < n; ++i) h -= spec.field * embed(n, {{i, onsite}});
  return h;
}

Tensor left_env_step(const Tensor& env, const Tensor& bra_site, const Tensor& w, const Tensor& ket_site) {
  Tensor t1 = contract(env, ket_site, {{2, 1}});            // (a', w, s, b)
  Tensor t2 = contract(t1, w, {{1, 2}, {2, 1}});            // (a', b, s', w')
  Tensor t3 = contract(bra_site.conj(), t2, {{0, 2}, {1, 0}});  // (b', b, w')
  return t3.permuted({0, 2, 1});
}

Tensor right_env_step(const Tensor& env, const Tensor& bra_site, const Tensor& w, const Tensor& ket_site) {
  Tensor t1 = contract(ket_site, env, {{2, 2}});            // (s, a, b', w')
  Tensor t2 = contract(w, t1, {{1, 0}, {3, 3}});            // (s', w, a, b')
  return contract(bra_site.conj(), t2, {{0, 0}, {2, 3}});   // (a', w, a)
}

cplx mpo_expectation(const Mps& psi, const Mpo& op) {
  if (psi.length() != op.length() || psi.phys_dim() != op.phys_dim())
    throw DimensionError("mpo_expectation: state and operator differ in length or physical dimension");
  Tensor env({1, 1, 1}, {cplx{1.0}});
  for (std::size_t l = 0; l < psi.length(); ++l) env = left_env_step(env, psi.site(l), op.site(l), psi.site(l));
  return env.data()[0];
}

Mpo density_from_trajectories(const std::vector<Mps>& states, std::size_t bond_budget) {
  if (states.empty()) throw DimensionError("density_from_trajectories: no states");
  const std::size_t length = states.front().length();
  const std::size_t d = states.front().phys_dim();
  for (const auto& s : states)
    if (s.length() != length || s.phys_dim() != d)
      throw DimensionError("density_from_trajectories: states differ in length or physical dimension");

  // Bond offsets of each trajectory's chi^2 block on every internal bond.
  std::vector<std::size_t> total(length + 1, 0);
  std::vector<std::vector<std::size_t>> offset(states.size(), std::vector<std::size_t>(length + 1, 0));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto b = states[i].bond_dims();
    for (std::size_t l = 1; l < length; ++l) {
      offset[i][l] = total[l];
      total[l] += b[l] * b[l];
    }
  }
  total[0] = total[length] = 1;
  for (std::size_t l = 1; l < length; ++l)
    if (total[l] > bond_budget)
      throw ResourceError("density_from_trajectories: bond " + std::to_string(l) + " needs " +
                          std::to_string(total[l]) + " > budget " + std::to_string(bond_budget));

  const double weight = 1.0 / static_cast<double>(states.size());
  std::vector<Tensor> sites;
  for (std::size_t l = 0; l < length; ++l) {
    Tensor w({d, d, total[l], total[l + 1]});
    for (std::size_t i = 0; i < states.size(); ++i) {
      const Tensor& m = states[i].site(l);
      const std::size_t cl = m.extent(1);
      const std::size_t cr = m.extent(2);
      const double c = l == 0 ? weight : 1.0;
      for (std::size_t s = 0; s < d; ++s)
        for (std::size_t sp = 0; sp < d; ++sp)
          for (std::size_t a = 0; a < cl; ++a)
            for (std::size_t ap = 0; ap < cl; ++ap)
              for (std::size_t b = 0; b < cr; ++b)
                for (std::size_t bp = 0; bp < cr; ++bp) {
                  const std::size_t row = l == 0 ? 0 : offset[i][l] + a * cl + ap;
                  const std::size_t col = l + 1 == length ? 0 : offset[i][l + 1] + b * cr + bp;
                  w(s, sp, row, col) += c * m(s, a, b) * std::conj(m(sp, ap, bp));
                }
    }
    sites.push_back(std::move(w));
  }
  return Mpo(std::move(sites));
}

}  // namespace tjm
