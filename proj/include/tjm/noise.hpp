#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tjm/mps.hpp"

namespace tjm {

/// One single-site jump channel sqrt(gamma) * op acting on `site`.
struct JumpOperator {
  std::size_t site = 0;
  LocalOp op;
  double gamma = 0.0;
  std::string name;  ///< label used in logs and configs
};

struct NoiseModel {
  std::vector<JumpOperator> jumps;

  bool empty() const noexcept { return jumps.empty(); }
  std::size_t size() const noexcept { return jumps.size(); }
};

/// Throws DimensionError / PreconditionError when a channel has a bad site,
/// a non d x d matrix, or a negative or non-finite rate.
void validate_noise(const NoiseModel& noise, std::size_t length, std::size_t d);

/// Convenience: the same channel on every site.
NoiseModel uniform_noise(std::size_t length, const LocalOp& op, double gamma, const std::string& name);

/// Concatenates the channels of two models (a first).
NoiseModel merge(NoiseModel a, const NoiseModel& b);

}  // namespace tjm
