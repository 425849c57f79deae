#pragma once

#include <vector>

#include "tjm/mps.hpp"
#include "tjm/noise.hpp"

namespace tjm {

/// Site-local factors of exp(-(dt/2) sum_m gamma_m L_m^dagger L_m).
struct DissipativeLayer {
  std::vector<LocalOp> locals;
  double dt_used = 0.0;
};

/// Half-step factors use build_layer(noise, L, dt / 2).
DissipativeLayer build_layer(const NoiseModel& noise, std::size_t length, double dt, std::size_t d = 2);

/// Contracts every D_l into its site tensor. Bonds are unchanged; the
/// canonical center is cleared because the factors are not unitary.
Mps apply_layer(Mps psi, const DissipativeLayer& layer);

}  // namespace tjm
