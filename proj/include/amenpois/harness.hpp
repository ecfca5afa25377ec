#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amenpois/limit_engine.hpp"

namespace amenpois {

struct LoadedConfig {
  nlohmann::json raw;
  Scenario scenario;
  std::string out_dir;
  std::uint64_t config_hash = 0;
};

/// One message per offending field, each starting with the field path.
std::vector<std::string> validate_config(const nlohmann::json& cfg);
/// Validates and converts; throws ValidationError.
LoadedConfig parse_config(nlohmann::json cfg, std::optional<std::uint64_t> seed_override = std::nullopt);
LoadedConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// FNV-1a 64 of the canonical dump, ignoring output location and worker count.
std::uint64_t config_hash(const nlohmann::json& cfg);
std::string hex_hash(std::uint64_t h);

/// AMENPOIS_WORKERS wins over the command-line value.
int resolve_workers(int cli_workers);

std::string csv_header();
std::string csv_row(const std::string& scenario, const ExperimentRow& row, std::uint64_t seed, std::uint64_t hash);
nlohmann::json row_json(const ExperimentRow& row);

struct RunOutcome {
  ExperimentResult result;
  bool complete = true;
  std::string error;
  std::string csv_path;
  std::string json_path;
};

/// Runs every grid point, writing CSV and JSON; on failure the completed rows are
/// kept and both files are marked incomplete.
RunOutcome run_experiment(const LoadedConfig& cfg, int workers, const std::optional<std::string>& out_dir = std::nullopt);

/// Self-contained SVG of TV and bound against n on a log-scaled y-axis.
std::string render_svg(const nlohmann::json& result);
void write_plot(const std::string& result_path, const std::string& out_path);

}  // namespace amenpois
