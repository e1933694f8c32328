#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msle {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input (configuration, preconditions).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Failures of a numerical procedure; the CLI maps these to exit code 3.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class DuplicatePoint : public InputError {
 public:
  DuplicatePoint(std::size_t i, std::size_t j)
      : InputError("duplicate point: x_" + std::to_string(i + 1) + " == x_" +
                   std::to_string(j + 1)),
        first(i),
        second(j) {}
  std::size_t first;
  std::size_t second;
};

class StepTooLarge : public InputError {
 public:
  using InputError::InputError;
};

class EpsilonTooLarge : public InputError {
 public:
  using InputError::InputError;
};

class CoincidentPoints : public InputError {
 public:
  using InputError::InputError;
};

class ProbeTooClose : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class SwallowedReference : public InputError {
 public:
  using InputError::InputError;
};

/// A tracked point was absorbed by the hull. `step` is the substep index at
/// which it happened and `time` the analytic swallowing time inside it.
class Swallowed : public Error {
 public:
  Swallowed(std::size_t step_index, double swallow_time, std::size_t point)
      : Error("point " + std::to_string(point) + " swallowed at step " +
              std::to_string(step_index) + " (t ~ " +
              std::to_string(swallow_time) + ")"),
        step(step_index),
        time(swallow_time),
        point_index(point) {}
  std::size_t step;
  double time;
  std::size_t point_index;
};

class NumericalBlowup : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class EffectiveSampleCollapse : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class SwallowedTooOften : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace msle
