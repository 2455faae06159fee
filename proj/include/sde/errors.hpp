#pragma once

#include <stdexcept>
#include <string>

namespace sde {

/// Precondition on shapes or dimensions was broken by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Data values are out of the accepted domain (non-finite, out-of-range ids).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A keyed resource (precomputed target, manifest entry) is missing.
class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every position of a batch is masked out, so there is nothing to predict.
class EmptyTargetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or gradient became non-finite. `term()` names the offending quantity.
class TrainingDivergence : public std::runtime_error {
 public:
  explicit TrainingDivergence(std::string term)
      : std::runtime_error("training diverged: non-finite " + term), term_(std::move(term)) {}

  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace sde
