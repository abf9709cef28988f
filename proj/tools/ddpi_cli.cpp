#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ddpi/errors.hpp"
#include "ddpi/harness/config.hpp"
#include "ddpi/harness/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace ddpi::harness;
  CLI::App app{"Data-driven policy iteration experiments"};
  app.require_subcommand(1);

  std::string run_config, output;
  unsigned workers = 0;
  auto* run = app.add_subcommand("run", "Execute every run of a config and write traces, summary.csv and manifest.json");
  run->add_option("config", run_config, "Config file")->required();
  run->add_option("-o,--output", output, "Output directory (overrides DDPI_OUTPUT_ROOT and output_dir)");
  run->add_option("-j,--workers", workers, "Worker threads (overrides the config)");

  std::string manifest;
  auto* summ = app.add_subcommand("summarize", "Print the comparison tables of a finished run");
  summ->add_option("manifest", manifest, "manifest.json, or the directory holding it")->required();

  std::string validate_config;
  auto* val = app.add_subcommand("validate", "Check a config against the schema without running it");
  val->add_option("config", validate_config, "Config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = load_config(run_config);
      if (workers > 0) cfg.workers = workers;
      const std::filesystem::path dir = output.empty() ? resolve_output_dir(cfg) : std::filesystem::path(output);
      const RunManifest m = run_experiment(cfg, dir);
      std::cout << "wrote " << (dir / "manifest.json").string() << " (" << m.json.at("jobs").size() << " jobs, "
                << m.failed_jobs << " failed)\n";
      return m.failed_jobs == 0 ? kExitOk : kExitPartial;
    }
    if (*summ) {
      std::filesystem::path p(manifest);
      if (std::filesystem::is_directory(p)) p /= "manifest.json";
      summarize(load_manifest(p), std::cout);
      return kExitOk;
    }
    const ExperimentConfig cfg = load_config(validate_config);
    std::cout << "ok: " << cfg.name << ", " << cfg.runs.size() << " runs, " << expand_jobs(cfg).size() << " jobs\n";
    return kExitOk;
  } catch (const ddpi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
