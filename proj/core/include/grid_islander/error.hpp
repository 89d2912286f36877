#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grid_islander {

enum class ErrorKind {
  NotFound,
  DegenerateBranch,
  Unreachable,
  MissingSection,
  ParseError,
  SchemaError,
  ConfigError,
  Io,
  EmptyLayer,
  NumericalDivergence,
  GridError,
  NotSynchronized,
  InitialIslandsOverlap,
  Stalled,
  DegenerateEstimate,
  UndefinedSize,
  SingularSystem,
  NotConverged,
  NoGenerator,
  ValidationFailed,
};

std::string_view to_string(ErrorKind kind);

/// Base class for every error raised by the library. The kind is stable and
/// machine readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed numeric or structural token in a case file.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Raised when a partitioning loop can no longer make progress.
class StalledError : public Error {
 public:
  StalledError(std::size_t round, std::vector<int> blocked, const std::string& message);

  std::size_t round() const noexcept { return round_; }
  const std::vector<int>& blocked() const noexcept { return blocked_; }

 private:
  std::size_t round_;
  std::vector<int> blocked_;
};

}  // namespace grid_islander
