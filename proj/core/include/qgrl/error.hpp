// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qgrl {

/// Category carried by every library exception. The CLI prints it verbatim
/// in its single-line error record.
enum class ErrorKind {
  kConfig,
  kIngestion,
  kDependency,
  kTraining,
  kInvalidArgument,
  kCheckpoint,
  kIo,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfig, m) {}
};

class IngestionError : public Error {
 public:
  IngestionError(const std::string& m, std::size_t line)
      : Error(ErrorKind::kIngestion, "line " + std::to_string(line) + ": " + m),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DependencyError : public Error {
 public:
  explicit DependencyError(const std::string& m)
      : Error(ErrorKind::kDependency, m) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& m) : Error(ErrorKind::kTraining, m) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& m)
      : Error(ErrorKind::kInvalidArgument, m) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& m)
      : Error(ErrorKind::kCheckpoint, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};

}  // namespace qgrl
