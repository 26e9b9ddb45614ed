#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ssmlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition or an input outside the supported regime.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration. `path` names the
/// offending field, e.g. "data.baseline.nonzero_indices[2]".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Raised when a numerical procedure cannot produce a trustworthy answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IllConditionedError : public NumericalError {
 public:
  IllConditionedError(const std::string& what, double condition)
      : NumericalError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// The adaptive integrator could not make progress. Carries the last accepted
/// state so callers can inspect where the flow stalled.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double t, std::vector<double> state)
      : NumericalError(what), t_(t), state_(std::move(state)) {}
  double time() const noexcept { return t_; }
  const std::vector<double>& last_state() const noexcept { return state_; }

 private:
  double t_;
  std::vector<double> state_;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : NumericalError(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace ssmlab
