#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grid_islander/grid_model.hpp"

namespace grid_islander {

/// Numeric tables of a MATPOWER case, in file order. Each row keeps the line
/// it started on for diagnostics.
struct RawCase {
  struct Row {
    std::vector<double> values;
    std::size_t line = 0;
  };

  double base_mva = 100.0;
  std::vector<Row> bus_table;
  std::vector<Row> gen_table;
  std::vector<Row> branch_table;
};

// Column offsets (0-based) in the MATPOWER tables.
namespace matpower_col {
inline constexpr std::size_t kBusId = 0, kBusType = 1, kPd = 2, kQd = 3, kGs = 4, kBs = 5, kVm = 7,
                             kBaseKv = 9;
inline constexpr std::size_t kGenBus = 0, kPg = 1, kQg = 2, kVg = 5, kGenStatus = 7;
inline constexpr std::size_t kFbus = 0, kTbus = 1, kR = 2, kX = 3, kB = 4, kRatio = 8, kAngle = 9,
                             kBrStatus = 10;
inline constexpr std::size_t kBusMinColumns = 13, kGenMinColumns = 10, kBranchMinColumns = 11;
}  // namespace matpower_col

/// Which generator-frequency source drives the decentralized agents.
enum class FrequencyMode { Analytic, Simulated };

enum class Algorithm { Centralized, Decentralized };

/// Everything needed to reproduce one islanding experiment.
struct ScenarioConfig {
  static constexpr int kSchemaVersion = 1;

  std::filesystem::path case_path;
  std::vector<BusId> generator_set;
  std::vector<std::vector<BusId>> initial_islands;
  std::vector<std::pair<BusId, BusId>> fault_branches;
  int n_mu = 2;
  std::uint64_t seed = 1;
  int ensemble_size = 20;
  double t_max = 100.0;
  double dt = 0.01;
  double rho_threshold = 0.99;
  double freq_epsilon = 1e-3;
  double sync_tolerance = 1e-4;
  double degeneracy_tolerance = 1e-9;
  int max_idle_rounds = 3;
  bool allow_fallback = true;
  bool shuffle_schedule = false;
  Algorithm algorithm = Algorithm::Centralized;
  FrequencyMode mode = FrequencyMode::Analytic;

  /// Throws ConfigError on a broken invariant.
  void validate() const;
};

/// Parses the text form of a MATPOWER case. Only baseMVA, bus, gen and
/// branch are consumed.
RawCase parse_case(std::string_view text);
RawCase parse_case_file(const std::filesystem::path& path);

/// Builds the grid. When `generator_set` is empty every bus with an
/// in-service machine dispatched above zero is a generator.
PowerNetwork build_network(const RawCase& raw_case, const std::vector<BusId>& generator_set = {});
PowerNetwork build_network(const RawCase& raw_case, const ScenarioConfig& config);

/// Reads the case named by the config, builds the grid and applies faults.
PowerNetwork load_scenario_network(const ScenarioConfig& config);

ScenarioConfig load_scenario_config(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace grid_islander
