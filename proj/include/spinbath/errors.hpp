#pragma once

#include <stdexcept>
#include <string>

namespace spinbath {

// Invalid physical argument (zero-length separation, negative density, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cluster or bath exceeds the dense-evolution capacity.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation called outside its validity regime (e.g. secular projection with
// the electron-electron dipolar coupling enabled).
struct UnsupportedRegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Eigenlevel labels cannot be assigned unambiguously.
struct LabelingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// <E_a| rho_S(0) |E_b> vanishes for a requested level pair.
struct NormalizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bath target density unachievable under the packing constraints.
struct ConstraintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Decay fit failed to converge, or the series shows no decay.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoDecayError : FitError {
  using FitError::FitError;
};

// Malformed configuration or command line (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pipeline-level failure in an otherwise valid run (CLI exit code 1).
struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spinbath
