#pragma once

#include <stdexcept>
#include <string>

namespace bbs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The periodic carrier iteration exceeded its pass budget. The least-fixed-point
// iteration provably converges within capacity+1 passes, so this signals a state
// outside the model's well-posed regime (or an internal invariant violation).
struct CarrierNonConvergent : Error {
  using Error::Error;
};

struct NonSaturatedSpectrum : Error {
  using Error::Error;
};

struct UndefinedPseudoenergy : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct DivergentQuantity : Error {
  using Error::Error;
};

struct SingularSystem : Error {
  using Error::Error;
};

struct DegenerateLeadingEigenvalue : Error {
  using Error::Error;
};

struct RootNotBracketed : Error {
  using Error::Error;
};

struct InvalidTemperature : Error {
  using Error::Error;
};

struct ExcessExclusions : Error {
  using Error::Error;
};

}  // namespace bbs
