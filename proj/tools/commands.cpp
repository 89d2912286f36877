#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "grid_islander/metrics.hpp"
#include "grid_islander/serialization.hpp"
#include "pipeline.hpp"

namespace grid_islander::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void configure_logging() {
  if (!spdlog::get("grid_islander")) spdlog::set_default_logger(spdlog::stderr_color_st("grid_islander"));
  spdlog::set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("GRID_ISLANDER_LOG")) {
    const std::string v(env);
    static const std::map<std::string, spdlog::level::level_enum> levels = {
        {"error", spdlog::level::err}, {"warn", spdlog::level::warn}, {"info", spdlog::level::info},
        {"debug", spdlog::level::debug}};
    if (const auto it = levels.find(v); it != levels.end()) level = it->second;
  }
  spdlog::set_level(level);
}

std::string plural(std::size_t n, const std::string& word) {
  if (n == 1) return "1 " + word;
  const bool sibilant = word.ends_with("s") || word.ends_with("ch");
  return std::to_string(n) + " " + word + (sibilant ? "es" : "s");
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string algorithm;
  std::string mode;
  std::string out;

  Overrides overrides() const {
    Overrides o;
    o.seed = seed;
    if (algorithm == "centralized") o.algorithm = Algorithm::Centralized;
    if (algorithm == "decentralized") o.algorithm = Algorithm::Decentralized;
    if (mode == "analytic") o.mode = FrequencyMode::Analytic;
    if (mode == "simulated") o.mode = FrequencyMode::Simulated;
    return o;
  }
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_algorithm) {
  cmd->add_option("--config", flags.config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "overrides the config seed");
  if (with_algorithm) {
    cmd->add_option("--algorithm", flags.algorithm)->check(CLI::IsMember({"centralized", "decentralized"}));
    cmd->add_option("--mode", flags.mode)->check(CLI::IsMember({"analytic", "simulated"}));
  }
}

class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {
    fs::create_directories(dir_);
  }

  fs::path json(const std::string& name, const nlohmann::json& doc) {
    const fs::path p = dir_ / name;
    write_json_file(p, doc);
    manifest_.artifacts.push_back(p);
    return p;
  }

  std::ofstream stream(const std::string& name) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    manifest_.artifacts.push_back(p);
    return out;
  }

  void finish() {
    manifest_.finished_at = utc_now();
    const fs::path p = dir_ / "manifest.json";
    manifest_.artifacts.push_back(p);
    write_json_file(p, manifest_.to_json());
  }

 private:
  fs::path dir_;
  RunManifest& manifest_;
};

RunManifest start_manifest(const Scenario& scenario, const std::string& command) {
  RunManifest m;
  m.scenario_hash = sha256_hex(scenario.config_bytes);
  m.seed = scenario.config.seed;
  m.command = command;
  m.started_at = utc_now();
  return m;
}

void write_sync_times(ArtifactWriter& out, const SyncTimeTable& times) {
  out.json("sync_times.json", sync_times_to_json(times));
  std::ofstream csv = out.stream("sync_times.csv");
  csv << "i,j,t_sync\n";
  for (const auto& [edge, t] : times.entries()) {
    csv << edge.first << ',' << edge.second << ',';
    if (std::isinf(t)) {
      csv << "inf";
    } else {
      csv << t;
    }
    csv << '\n';
  }
}

// Writes the partition artifacts; returns false when validation failed.
bool write_partition(ArtifactWriter& out, const PartitionRun& run) {
  out.json("partition.json", partition_to_json(run.partition));
  out.json(run.log_name, run.log);
  out.json("validity.json", validity_to_json(run.validity));
  if (run.sync_times) write_sync_times(out, *run.sync_times);
  return run.validity.ok();
}

// The report is written either way; a failed island flow still fails the run.
void require_complete(const MetricsReport& report) {
  if (report.complete()) return;
  std::string labels;
  for (const IslandMetrics& m : report.islands) {
    if (!m.failure.empty()) labels += (labels.empty() ? "" : ", ") + std::to_string(m.label);
  }
  throw Error(ErrorKind::NotConverged, "power flow did not converge in island(s) " + labels + "; J2 and J3 are unset");
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : artifacts) paths.push_back(p.generic_string());
  return {{"scenario_hash", scenario_hash}, {"seed", seed},           {"tool_version", tool_version},
          {"command", command},             {"started_at", started_at}, {"finished_at", finished_at},
          {"artifacts", paths}};
}

int run_cli(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Controlled islanding of power grids with Kuramoto cyberlayers", "grid-islander"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string case_path, parse_out;
  CLI::App* parse = app.add_subcommand("parse", "read a MATPOWER case and print its size");
  parse->add_option("case", case_path, "MATPOWER .m file")->required();
  parse->add_option("--out", parse_out, "write the network as JSON");

  CommonFlags sim_flags;
  std::size_t sim_run = 0, sim_stride = 10;
  CLI::App* simulate = app.add_subcommand("simulate", "integrate one ensemble member of the grid cyberlayer");
  add_common(simulate, sim_flags, false);
  simulate->add_option("--run", sim_run, "ensemble member");
  simulate->add_option("--stride", sim_stride, "write every n-th step")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_flags.out, "trajectory CSV")->required();

  CommonFlags sync_flags;
  CLI::App* sync = app.add_subcommand("sync-times", "internode synchronization times of the grid cyberlayer");
  add_common(sync, sync_flags, false);
  sync->add_option("--out", sync_flags.out, "output directory")->required();

  CommonFlags part_flags;
  CLI::App* part = app.add_subcommand("partition", "grow the seed islands into a partition");
  add_common(part, part_flags, true);
  part->add_option("--out", part_flags.out, "output directory")->required();

  CommonFlags met_flags;
  std::string partition_path;
  CLI::App* met = app.add_subcommand("metrics", "score a partition");
  add_common(met, met_flags, false);
  met->add_option("--partition", partition_path, "partition JSON")->required()->check(CLI::ExistingFile);
  met->add_option("--out", met_flags.out, "report JSON")->required();

  CommonFlags all_flags;
  CLI::App* all = app.add_subcommand("run-all", "parse, partition and score in one go");
  add_common(all, all_flags, true);
  all->add_option("--out", all_flags.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  fs::path error_dir;
  try {
    if (*parse) {
      const RawCase raw = parse_case_file(case_path);
      if (!parse_out.empty()) write_json_file(parse_out, network_to_json(build_network(raw)));
      std::cout << plural(raw.bus_table.size(), "bus") << ", " << plural(raw.branch_table.size(), "branch") << ", "
                << plural(raw.gen_table.size(), "generator") << '\n';
      return 0;
    }
    if (*simulate) {
      const Scenario sc = load_scenario(sim_flags.config, sim_flags.overrides());
      const CyberLayer layer = build_layer(sc.network, sc.network.all_nodes(), "grid");
      const auto initial = run_initial_conditions(layer.size(), sc.config.seed, sim_run);
      std::ofstream csv(sim_flags.out, std::ios::binary);
      if (!csv) throw Error(ErrorKind::Io, "cannot write " + sim_flags.out);
      write_trajectory_csv_header(csv);
      std::size_t k = 0;
      integrate_streaming(layer, initial, sc.config.t_max, sc.config.dt, [&](const PhaseState& s) {
        if (k++ % sim_stride == 0) append_trajectory_csv(csv, layer, s);
      });
      return 0;
    }
    if (*sync) {
      error_dir = sync_flags.out;
      const Scenario sc = load_scenario(sync_flags.config, sync_flags.overrides());
      RunManifest manifest = start_manifest(sc, "sync-times");
      ArtifactWriter out(sync_flags.out, manifest);
      write_sync_times(out, compute_sync_times(sc));
      out.finish();
      return 0;
    }
    if (*part || *all) {
      const CommonFlags& flags = *part ? part_flags : all_flags;
      error_dir = flags.out;
      const Scenario sc = load_scenario(flags.config, flags.overrides());
      RunManifest manifest = start_manifest(sc, *part ? "partition" : "run-all");
      ArtifactWriter out(flags.out, manifest);
      if (*all) out.json("network.json", network_to_json(sc.network));
      const PartitionRun run = run_partition(sc);
      if (!write_partition(out, run)) {
        out.finish();
        std::cout << validity_to_json(run.validity).dump(2) << '\n';
        throw Error(ErrorKind::ValidationFailed, "partition failed validation");
      }
      if (*all) {
        const MetricsReport report = evaluate_partition(sc.network, run.partition);
        out.json("metrics.json", metrics_report_to_json(report));
        std::cout << metrics_summary_line(report) << '\n';
        out.finish();
        require_complete(report);
        return 0;
      }
      out.finish();
      return 0;
    }
    if (*met) {
      const Scenario sc = load_scenario(met_flags.config, met_flags.overrides());
      const Partition partition = partition_from_json(read_json_file(partition_path), sc.network);
      const ValidityReport validity = validate_partition(sc.network, partition);
      if (!validity.ok()) {
        std::cout << validity_to_json(validity).dump(2) << '\n';
        throw Error(ErrorKind::ValidationFailed, "partition failed validation");
      }
      const MetricsReport report = evaluate_partition(sc.network, partition);
      write_json_file(met_flags.out, metrics_report_to_json(report));
      std::cout << metrics_summary_line(report) << '\n';
      require_complete(report);
      return 0;
    }
  } catch (const std::exception& e) {
    const nlohmann::json doc = error_to_json(e);
    std::cerr << doc.dump() << '\n';
    if (!error_dir.empty()) {
      std::error_code ec;
      fs::create_directories(error_dir, ec);
      std::ofstream(error_dir / "error.json") << doc.dump(2) << '\n';
    }
    return doc["error"]["exit_code"].get<int>();
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace grid_islander::cli
