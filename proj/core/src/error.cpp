#include "grid_islander/error.hpp"

namespace grid_islander {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::DegenerateBranch: return "DegenerateBranch";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::MissingSection: return "MissingSection";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::Io: return "Io";
    case ErrorKind::EmptyLayer: return "EmptyLayer";
    case ErrorKind::NumericalDivergence: return "NumericalDivergence";
    case ErrorKind::GridError: return "GridError";
    case ErrorKind::NotSynchronized: return "NotSynchronized";
    case ErrorKind::InitialIslandsOverlap: return "InitialIslandsOverlap";
    case ErrorKind::Stalled: return "Stalled";
    case ErrorKind::DegenerateEstimate: return "DegenerateEstimate";
    case ErrorKind::UndefinedSize: return "UndefinedSize";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::NoGenerator: return "NoGenerator";
    case ErrorKind::ValidationFailed: return "ValidationFailed";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& message)
    : Error(ErrorKind::ParseError,
            "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

StalledError::StalledError(std::size_t round, std::vector<int> blocked, const std::string& message)
    : Error(ErrorKind::Stalled, message), round_(round), blocked_(std::move(blocked)) {}

}  // namespace grid_islander
