#include "tjm/dissipation.hpp"

#include <cmath>

#include "tjm/errors.hpp"

namespace tjm {

DissipativeLayer build_layer(const NoiseModel& noise, std::size_t length, double dt, std::size_t d) {
  if (!(dt >= 0.0)) throw PreconditionError("build_layer: dt must be non-negative");
  validate_noise(noise, length, d);
  const auto n = static_cast<Eigen::Index>(d);
  std::vector<LocalOp> sums(length, LocalOp::Zero(n, n));
  for (const auto& j : noise.jumps) sums[j.site] += j.gamma * (j.op.adjoint() * j.op);

  DissipativeLayer layer;
  layer.dt_used = dt;
  for (auto& s : sums) {
    if (s.isZero(0.0)) {
      layer.locals.push_back(LocalOp::Identity(n, n));
      continue;
    }
    const LocalOp h = 0.5 * (s + s.adjoint());
    Eigen::SelfAdjointEigenSolver<LocalOp> es(h);
    if (es.info() != Eigen::Success) throw NumericError("build_layer: eigendecomposition failed");
    const Eigen::VectorXd w = (-0.5 * dt * es.eigenvalues().array()).exp();
    layer.locals.push_back(es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint());
  }
  return layer;
}

Mps apply_layer(Mps psi, const DissipativeLayer& layer) {
  if (layer.locals.size() != psi.length())
    throw DimensionError("apply_layer: layer has " + std::to_string(layer.locals.size()) +
                         " sites, state has " + std::to_string(psi.length()));
  bool all_identity = true;
  for (std::size_t l = 0; l < psi.length(); ++l) {
    const LocalOp& op = layer.locals[l];
    if (op.isIdentity(0.0)) continue;
    all_identity = false;
    psi.set_site(l, apply_to_site(op, psi.site(l)));
  }
  if (!all_identity) psi.set_center(std::nullopt);
  return psi;
}

}  // namespace tjm
