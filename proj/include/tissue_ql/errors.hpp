#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tql {

/// Invalid scenario, lattice, or camera configuration. `field` names the
/// offending configuration key when one is known.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// A node force or position became non-finite during integration.
class SimulationDiverged : public std::runtime_error {
public:
  explicit SimulationDiverged(std::size_t node)
      : std::runtime_error("simulation diverged at node " + std::to_string(node)), node_(node) {}

  std::size_t node() const noexcept { return node_; }

private:
  std::size_t node_;
};

/// The TD error or an updated weight became non-finite.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Smallest enclosing circle requested for an empty point set.
class NoDetection : public std::runtime_error {
public:
  NoDetection() : std::runtime_error("no pixels to fit") {}
};

/// Malformed policy (weight) file.
class PolicyLoadError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace tql
