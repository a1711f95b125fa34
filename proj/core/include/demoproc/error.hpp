#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace demoproc {

// Non-fatal diagnostics collected alongside a result.
using Warnings = std::vector<std::string>;

// Root of every error thrown by the library. exit_code() follows the CLI
// convention: 2 for data/format problems, 3 for numerical/degenerate ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// A record ended before its declared payload length.
class TruncationError : public FormatError {
 public:
  TruncationError(const std::string& what, std::size_t offset, std::uint8_t channel)
      : FormatError(what), offset_(offset), channel_(channel) {}
  std::size_t offset() const noexcept { return offset_; }
  std::uint8_t channel() const noexcept { return channel_; }

 private:
  std::size_t offset_;
  std::uint8_t channel_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedTopologyError : public TopologyError {
 public:
  using TopologyError::TopologyError;
};

class UnsupportedJointError : public FormatError {
 public:
  using FormatError::FormatError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

class BehindCameraError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace demoproc
