#include "tjm/noise.hpp"

#include <cmath>

#include "tjm/errors.hpp"

namespace tjm {

void validate_noise(const NoiseModel& noise, std::size_t length, std::size_t d) {
  for (std::size_t m = 0; m < noise.jumps.size(); ++m) {
    const auto& j = noise.jumps[m];
    const std::string tag = "jump " + std::to_string(m) + " (" + j.name + ")";
    if (j.site >= length)
      throw DimensionError(tag + ": site " + std::to_string(j.site) + " outside chain of length " +
                           std::to_string(length));
    if (static_cast<std::size_t>(j.op.rows()) != d || static_cast<std::size_t>(j.op.cols()) != d)
      throw DimensionError(tag + ": operator must be " + std::to_string(d) + "x" + std::to_string(d));
    if (!std::isfinite(j.gamma) || j.gamma < 0.0)
      throw PreconditionError(tag + ": rate must be finite and non-negative");
    if (!j.op.allFinite()) throw PreconditionError(tag + ": operator has non-finite entries");
  }
}

NoiseModel uniform_noise(std::size_t length, const LocalOp& op, double gamma, const std::string& name) {
  NoiseModel n;
  for (std::size_t l = 0; l < length; ++l) n.jumps.push_back({l, op, gamma, name});
  return n;
}

NoiseModel merge(NoiseModel a, const NoiseModel& b) {
  a.jumps.insert(a.jumps.end(), b.jumps.begin(), b.jumps.end());
  return a;
}

}  // namespace tjm
