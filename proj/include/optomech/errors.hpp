#pragma once

#include <stdexcept>
#include <string>

namespace optomech {

// Malformed inputs: wrong dimensions, out-of-range indices, cutoffs that
// violate a type invariant.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A covariance matrix or density matrix that fails its physicality checks.
class ValidationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Parameters outside the model's domain (e.g. an unstable drift matrix).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A quadrature or truncation that failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Conditioning on an outcome whose probability is numerically zero.
class DegenerateOutcomeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace optomech
