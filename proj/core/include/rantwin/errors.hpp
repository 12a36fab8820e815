#pragma once

#include <stdexcept>
#include <string>

namespace rantwin {

// Every failure the library raises derives from Error. The CLI maps the
// concrete type onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by an argument value (non-positive distance, unknown
// cell, label out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration. `field()` names the offending key when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {});
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed file content (model, dataset, stats, schedule).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite intermediate or divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& message, int epoch);
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Message-bus contract violation.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rantwin
