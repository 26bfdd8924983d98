#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lgv {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient encountered during a numeric procedure.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t epoch, const std::string& detail)
      : NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + detail),
        epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class InsufficientExamples : public Error {
 public:
  InsufficientExamples(std::size_t requested, std::size_t available)
      : Error("requested " + std::to_string(requested) +
              " examples correctly classified by every target, only " +
              std::to_string(available) + " available"),
        requested_(requested),
        available_(available) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t requested_;
  std::size_t available_;
};

class DegeneratePlane : public Error {
 public:
  using Error::Error;
};

}  // namespace lgv
