#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lleda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A statistic needs more rows than were supplied.
class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition (wrong arity, non-scalar output, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Sampling was requested from an empty replay memory.
class EmptyMemoryError : public Error {
 public:
  using Error::Error;
};

/// Training data of a completed domain was requested again.
class SealedDomainError : public Error {
 public:
  using Error::Error;
};

/// Probe training labels contain a single class.
class DegenerateLabelsError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary stream. Carries the byte offset at which decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace lleda
