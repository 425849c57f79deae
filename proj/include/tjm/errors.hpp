#pragma once

#include <stdexcept>
#include <string>

namespace tjm {

// Error classes thrown across the library. The CLI maps each class onto an
// exit code, so keep the hierarchy flat.

/// Incompatible extents, ranks or chain lengths.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization failed or produced non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A dense oracle or a density reconstruction would exceed its size guard.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called on a state that does not satisfy its contract,
/// e.g. the wrong orthogonality center.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A state with zero norm cannot be renormalized.
class DegenerateStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// More than the allowed fraction of trajectories in an ensemble aborted.
class EnsembleAbortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tjm
