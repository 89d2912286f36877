#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace grid_islander::cli {

inline constexpr const char* kToolVersion = GRID_ISLANDER_VERSION;

struct RunManifest {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string command;
  std::string started_at;
  std::string finished_at;
  std::vector<std::filesystem::path> artifacts;

  nlohmann::json to_json() const;
};

/// Parses argv and dispatches to a subcommand. Returns the process exit code.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace grid_islander::cli
