#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddpi/lti_sim.hpp"
#include "ddpi/lyapunov_riccati.hpp"

namespace ddpi::harness {

enum class Method { model_based, ipi, dpi };

const char* method_name(Method m);

/// One [run:<id>] section. Expands into one job per seed (model-based: one job).
struct RunSpec {
  std::string id;
  Method method = Method::model_based;
  std::size_t tau = 1;
  std::size_t episodes = 0;
  std::size_t horizon = 0;  // timesteps; episodes = horizon / tau when given
  Eigen::MatrixXd K1;
  DitherKind dither = DitherKind::zero;
  Eigen::MatrixXd dither_cov;
  std::vector<std::uint64_t> seeds;
  double a = 1.0;
  Eigen::MatrixXd theta0;  // empty means zero
  Eigen::VectorXd x0;      // empty means all ones
  int max_iters = 100;
  double tol = 1e-12;
  double max_gram_cond = 1e16;
  bool monitor_assumption2 = true;
  double k_tol = 1e-3;  // gain error counted as converged
};

struct ExperimentConfig {
  std::string name;
  std::string output_dir;
  unsigned workers = 1;
  LinearSystem sys;
  CostSpec cost;
  std::vector<RunSpec> runs;
  std::string source_text;  // exact bytes the config was parsed from
};

/// INI-style text: [experiment], [system], [cost] and any number of [run:<id>] sections.
/// Matrices are written row by row, rows separated by ';' and entries by spaces.
/// Throws ConfigError on any schema violation, including unknown sections or keys.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

Eigen::MatrixXd parse_matrix(const std::string& s);
Eigen::VectorXd parse_vector(const std::string& s);

/// Text form accepted by parse_matrix, 17 significant digits.
std::string format_matrix(const Eigen::MatrixXd& m);

}  // namespace ddpi::harness
