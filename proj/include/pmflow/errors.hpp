#pragma once

#include <stdexcept>
#include <string>

namespace pmflow {

/// Argument outside the domain of a mathematical operation (non-finite
/// slope, conjugate slope requested below the threshold, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A Lagrangian failed the structural checks (evenness, convex-concavity,
/// sublinear growth, ...).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No bi-Lipschitz window exists for the requested edge.
class WindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent run configuration (inadmissible ladder, bad sizes, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Step size fell below the underflow floor.
class StiffnessError : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

/// The state became non-finite.
class DivergenceError : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

}  // namespace pmflow
