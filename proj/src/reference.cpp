#include "tjm/reference.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "tjm/engine.hpp"
#include "tjm/errors.hpp"

namespace tjm {

namespace {

std::size_t sites_of(Eigen::Index dim) {
  std::size_t n = 0;
  Eigen::Index v = 1;
  while (v < dim) {
    v *= 2;
    ++n;
  }
  if (v != dim) throw DimensionError("dense operator dimension is not a power of 2");
  return n;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::MatrixXcd identity_pow2(std::size_t n) {
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  return Eigen::MatrixXcd::Identity(dim, dim);
}

// Dense left partial states of sites 0..l-1 for l = 0..L (columns = bond index).
std::vector<Eigen::MatrixXcd> left_partials(const Mps& left_canonical) {
  const std::size_t length = left_canonical.length();
  std::vector<Eigen::MatrixXcd> out{Eigen::MatrixXcd::Ones(1, 1)};
  for (std::size_t k = 0; k < length; ++k) {
    const Tensor& a = left_canonical.site(k);
    const std::size_t d = a.extent(0), cl = a.extent(1), cr = a.extent(2);
    const Eigen::MatrixXcd& prev = out.back();
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(prev.rows() * static_cast<Eigen::Index>(d),
                                                   static_cast<Eigen::Index>(cr));
    for (Eigen::Index l = 0; l < prev.rows(); ++l)
      for (std::size_t s = 0; s < d; ++s)
        for (std::size_t al = 0; al < cl; ++al)
          for (std::size_t b = 0; b < cr; ++b)
            next(l * static_cast<Eigen::Index>(d) + static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)) +=
                prev(l, static_cast<Eigen::Index>(al)) * a(s, al, b);
    out.push_back(std::move(next));
  }
  return out;
}

// Dense right partial states of sites l..L-1 for l = 0..L.
std::vector<Eigen::MatrixXcd> right_partials(const Mps& right_canonical) {
  const std::size_t length = right_canonical.length();
  std::vector<Eigen::MatrixXcd> out(length + 1);
  out[length] = Eigen::MatrixXcd::Ones(1, 1);
  for (std::size_t k = length; k-- > 0;) {
    const Tensor& b = right_canonical.site(k);
    const std::size_t d = b.extent(0), cl = b.extent(1), cr = b.extent(2);
    const Eigen::MatrixXcd& prev = out[k + 1];
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(d) * prev.rows(),
                                                   static_cast<Eigen::Index>(cl));
    for (std::size_t s = 0; s < d; ++s)
      for (Eigen::Index r = 0; r < prev.rows(); ++r)
        for (std::size_t a = 0; a < cl; ++a)
          for (std::size_t bb = 0; bb < cr; ++bb)
            next(static_cast<Eigen::Index>(s) * prev.rows() + r, static_cast<Eigen::Index>(a)) +=
                b(s, a, bb) * prev(r, static_cast<Eigen::Index>(bb));
    out[k] = std::move(next);
  }
  return out;
}

}  // namespace

Eigen::MatrixXcd embed_site(const LocalOp& op, std::size_t site, std::size_t length) {
  if (site >= length) throw DimensionError("embed_site: site outside chain");
  return kron(kron(identity_pow2(site), op), identity_pow2(length - site - 1));
}

Eigen::MatrixXcd embed_pair(const LocalOp& op_a, const LocalOp& op_b, std::size_t site, std::size_t length) {
  if (site + 1 >= length) throw DimensionError("embed_pair: sites outside chain");
  return kron(kron(kron(identity_pow2(site), op_a), op_b), identity_pow2(length - site - 2));
}

Eigen::MatrixXcd dense_expm(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw DimensionError("dense_expm: matrix must be square");
  if (static_cast<std::size_t>(m.rows()) > max_expm_dim) throw ResourceError("dense_expm: dimension above 4096");
  Eigen::MatrixXcd out = m.exp();
  if (!out.allFinite()) throw NumericError("dense_expm: non-finite result");
  return out;
}

Eigen::MatrixXcd pure_density(const Eigen::VectorXcd& v) { return v * v.adjoint(); }

std::vector<Eigen::MatrixXcd> lindblad_solve(const Eigen::MatrixXcd& h, const NoiseModel& noise,
                                             const Eigen::MatrixXcd& rho0, double dt, double total_time,
                                             int substeps) {
  const std::size_t length = sites_of(h.rows());
  if (length > max_lindblad_sites) throw ResourceError("lindblad_solve: at most 7 sites");
  if (rho0.rows() != h.rows() || rho0.cols() != h.cols()) throw DimensionError("lindblad_solve: rho0 shape");
  if (substeps < 1) throw PreconditionError("lindblad_solve: substeps must be positive");
  validate_noise(noise, length, 2);
  const std::size_t n = steps_for(total_time, dt);

  std::vector<Eigen::MatrixXcd> ls;
  Eigen::MatrixXcd heff = h;
  for (const auto& j : noise.jumps) {
    if (j.gamma == 0.0) continue;
    Eigen::MatrixXcd l = std::sqrt(j.gamma) * embed_site(j.op, j.site, length);
    heff -= cplx{0.0, 0.5} * (l.adjoint() * l);
    ls.push_back(std::move(l));
  }
  const Eigen::MatrixXcd heff_dag = heff.adjoint();
  const cplx mi{0.0, -1.0};
  auto rhs = [&](const Eigen::MatrixXcd& r) {
    Eigen::MatrixXcd out = mi * (heff * r - r * heff_dag);
    for (const auto& l : ls) out.noalias() += l * r * l.adjoint();
    return out;
  };

  const double tau = dt / substeps;
  std::vector<Eigen::MatrixXcd> series{rho0};
  Eigen::MatrixXcd rho = rho0;
  for (std::size_t j = 0; j < n; ++j) {
    for (int s = 0; s < substeps; ++s) {
      const Eigen::MatrixXcd k1 = rhs(rho);
      const Eigen::MatrixXcd k2 = rhs(rho + 0.5 * tau * k1);
      const Eigen::MatrixXcd k3 = rhs(rho + 0.5 * tau * k2);
      const Eigen::MatrixXcd k4 = rhs(rho + tau * k3);
      rho += (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      rho = 0.5 * (rho + rho.adjoint()).eval();
    }
    series.push_back(rho);
  }
  return series;
}

DenseMcwf::DenseMcwf(const Eigen::MatrixXcd& h, const NoiseModel& noise, double dt) : dt_(dt) {
  const std::size_t length = sites_of(h.rows());
  if (length > max_mcwf_sites) throw ResourceError("mcwf: at most 10 sites");
  if (!(dt > 0.0)) throw PreconditionError("mcwf: dt must be positive");
  validate_noise(noise, length, 2);
  Eigen::MatrixXcd heff = h;
  for (const auto& j : noise.jumps) {
    Eigen::MatrixXcd l = std::sqrt(j.gamma) * embed_site(j.op, j.site, length);
    Eigen::MatrixXcd w = l.adjoint() * l;
    heff -= cplx{0.0, 0.5} * w;
    ops_.push_back(std::move(l));
    weights_.push_back(std::move(w));
  }
  propagator_ = dense_expm(cplx{0.0, -dt} * heff);
}

long DenseMcwf::step(Eigen::VectorXcd& psi, TrajectoryRng& rng) const {
  if (ops_.empty()) {
    psi = propagator_ * psi;
    psi.normalize();
    return -1;
  }
  std::vector<double> dpm(ops_.size());
  double dp = 0.0;
  for (std::size_t m = 0; m < ops_.size(); ++m) {
    dpm[m] = dt_ * psi.dot(weights_[m] * psi).real();
    dp += dpm[m];
  }
  const double eps = rng.uniform();
  if (eps >= dp) {
    psi = propagator_ * psi;
    const double n = psi.norm();
    if (!(n > 0.0)) throw DegenerateStateError("mcwf: zero norm");
    psi /= n;
    return -1;
  }
  for (double& p : dpm) p /= dp;
  const std::size_t m = select_jump(dpm, rng.uniform());
  psi = ops_[m] * psi;
  const double n = psi.norm();
  if (!(n > 0.0)) throw DegenerateStateError("mcwf: zero norm after jump");
  psi /= n;
  return static_cast<long>(m);
}

DenseMcwf::Trajectory DenseMcwf::run(const Eigen::VectorXcd& psi0, std::size_t steps, TrajectoryRng& rng) const {
  if (psi0.size() != propagator_.rows()) throw DimensionError("mcwf: initial state dimension");
  Trajectory t;
  Eigen::VectorXcd psi = psi0.normalized();
  t.states.push_back(psi);
  for (std::size_t j = 0; j < steps; ++j) {
    const long m = step(psi, rng);
    if (m >= 0) t.jumps.emplace_back(j, static_cast<std::size_t>(m));
    t.states.push_back(psi);
  }
  return t;
}

DenseMcwf::Trajectory mcwf_trajectory(const Eigen::MatrixXcd& h, const NoiseModel& noise,
                                      const Eigen::VectorXcd& psi0, double dt, double total_time,
                                      TrajectoryRng& rng) {
  return DenseMcwf(h, noise, dt).run(psi0, steps_for(total_time, dt), rng);
}

Eigen::MatrixXcd tangent_projector(const Mps& psi) {
  const std::size_t length = psi.length();
  if (length > max_mcwf_sites) throw ResourceError("tangent_projector: at most 10 sites");
  if (psi.phys_dim() != 2) throw DimensionError("tangent_projector: spin-1/2 chains only");
  const auto left = left_partials(canonicalize(psi, length - 1));
  const auto right = right_partials(canonicalize(psi, 0));
  auto proj = [](const Eigen::MatrixXcd& m) -> Eigen::MatrixXcd { return m * m.adjoint(); };

  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << length);
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(dim, dim);
  const Eigen::MatrixXcd id2 = Eigen::MatrixXcd::Identity(2, 2);
  for (std::size_t l = 0; l < length; ++l) p += kron(kron(proj(left[l]), id2), proj(right[l + 1]));
  for (std::size_t l = 1; l < length; ++l) p -= kron(proj(left[l]), proj(right[l]));
  return p;
}

double projection_error(const Mps& psi, const Mpo& h) {
  if (psi.length() != h.length()) throw DimensionError("projection_error: length mismatch");
  if (psi.length() > max_mcwf_sites) throw ResourceError("projection_error: at most 10 sites");
  Eigen::VectorXcd v = psi.to_dense();
  const double n = v.norm();
  if (!(n > 0.0)) throw DegenerateStateError("projection_error: zero state");
  v /= n;
  const Eigen::VectorXcd hv = h.to_dense() * v;
  const Eigen::MatrixXcd p = tangent_projector(psi);
  return (hv - p * hv).norm();
}

}  // namespace tjm
