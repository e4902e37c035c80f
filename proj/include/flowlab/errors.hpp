#pragma once

#include <stdexcept>
#include <string>

namespace flowlab {

/// Input outside an operation's domain (e.g. t outside [0,1], non-finite x).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid object construction (bad weights, non-SPD covariance, ...).
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A target lacks a capability the operation needs (missing gradient, ...).
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical failure during integration: carries the offending time.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t_fail)
      : std::runtime_error(what), t(t_fail) {}
  double t;
};

/// Config file problems; message is line-anchored where possible.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowlab
