#pragma once

#include <stdexcept>
#include <string>

namespace itolab {

// Bad inputs: the CLI maps every InputError to exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures while running a well-formed experiment: exit status 1.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model constant or a measured property violates a stated bound.
class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigurationError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class SizeError : public InputError {
 public:
  using InputError::InputError;
};

class DataError : public InputError {
 public:
  using InputError::InputError;
};

/// An object was used before it was ready (e.g. an untrained quantile table).
class StateError : public RunError {
 public:
  using RunError::RunError;
};

/// Too many trajectories left the finite region.
class DivergenceError : public RunError {
 public:
  using RunError::RunError;
};

}  // namespace itolab
