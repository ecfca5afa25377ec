#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "amenpois/errors.hpp"
#include "amenpois/harness.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compound-Poisson approximation experiments on amenable-group windows"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  int workers = 1;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run a scenario and write CSV and JSON results");
  run->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out-dir", out_dir, "Output directory (overrides output.dir)");
  run->add_option("--workers", workers, "Worker threads (AMENPOIS_WORKERS overrides)")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Master seed (overrides master_seed)");

  std::string result_path;
  std::string svg_path;
  auto* plot = app.add_subcommand("plot", "Render a result JSON as an SVG chart");
  plot->add_option("--result", result_path, "Result JSON")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", svg_path, "Output SVG")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario config");
  validate->add_option("--config", validate_path, "Scenario JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = amenpois::load_config(config_path, seed);
      const int n_workers = amenpois::resolve_workers(workers);
      const auto outcome = amenpois::run_experiment(cfg, n_workers, out_dir);
      std::cout << "wrote " << outcome.csv_path << " and " << outcome.json_path << " (" << outcome.result.rows.size()
                << " rows, config " << amenpois::hex_hash(cfg.config_hash) << ")\n";
      if (!outcome.complete) {
        std::cerr << "run incomplete: " << outcome.error << '\n';
        return kExitRuntime;
      }
      return 0;
    }
    if (*plot) {
      amenpois::write_plot(result_path, svg_path);
      std::cout << "wrote " << svg_path << '\n';
      return 0;
    }
    if (*validate) {
      const auto cfg = amenpois::load_config(validate_path);
      std::cout << "ok: " << cfg.scenario.name << " (config " << amenpois::hex_hash(cfg.config_hash) << ")\n";
      return 0;
    }
  } catch (const amenpois::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
