#pragma once

#include <stdexcept>
#include <string>

namespace vasl {

// Shape or argument contract violated by the caller.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file, missing file, or dataset inconsistency.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or a numeric check that failed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of the autodiff graph (double backward, detached loss, ...).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace vasl
