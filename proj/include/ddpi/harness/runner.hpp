#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddpi/harness/config.hpp"

namespace ddpi::harness {

using Json = nlohmann::ordered_json;

/// One (run, seed) pair. Model-based runs expand to a single job without a seed.
struct Job {
  std::size_t run_index = 0;
  std::optional<std::uint64_t> seed;
};

std::vector<Job> expand_jobs(const ExperimentConfig& cfg);

struct JobResult {
  std::string run_id;
  Method method = Method::model_based;
  std::optional<std::uint64_t> seed;
  std::string status = "ok";  // ok | underdetermined | error
  std::string message;
  // Relative path -> file contents. Written after the pool joins.
  std::vector<std::pair<std::string, std::string>> files;
  Json summary = Json::object();
};

/// Runs one job. Method errors are caught and recorded in the result.
JobResult run_job(const ExperimentConfig& cfg, const Job& job);

struct RunManifest {
  std::filesystem::path dir;
  Json json;
  std::size_t failed_jobs = 0;
};

/// Git blob hash of the bytes: sha1("blob <len>\0" + bytes), lowercase hex.
std::string git_blob_hash(const std::string& bytes);

/// Output root: DDPI_OUTPUT_ROOT/<name> when the variable is set, else the config's output_dir.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

/// Executes every job on a pool of cfg.workers threads and writes the trace CSVs,
/// summary.csv and manifest.json under out_dir. Output order depends only on the config.
RunManifest run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Loads a manifest and checks that it is complete and every indexed file exists.
/// Throws ConfigError otherwise.
Json load_manifest(const std::filesystem::path& manifest_path);

/// Per-run comparison table followed by the equal-budget table.
void summarize(const Json& manifest, std::ostream& os);

}  // namespace ddpi::harness
