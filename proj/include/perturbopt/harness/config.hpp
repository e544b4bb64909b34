#pragma once

// Experiment configuration: one YAML file drives a whole run.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perturbopt/common.hpp"
#include "perturbopt/perturb.hpp"
#include "perturbopt/problems.hpp"

namespace perturbopt::harness {

/// Invalid configuration. `line` and `column` are 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = 0, int column = 0)
      : Error(message), line(line), column(column) {}
  int line;
  int column;
};

struct OptimizerConfig {
  std::string method = "ksos";  ///< ksos, random_search or nelder_mead
  std::size_t M = 64;
  double s = 0.0;                     ///< 0 selects d/2 + 2.5
  std::optional<double> lambda_phi;   ///< unset: the M-dependent schedule
  double cbar = 0.3;
  double delta = 0.1;
  std::string baseline = "random_search";
  std::size_t baseline_budget = 0;  ///< 0 matches the kSoS evaluation count
  std::size_t random_policies = 20;
};

struct SweepConfig {
  std::vector<double> lambda_grid{0.04, 0.08, 0.16, 0.32, 0.64};
  std::vector<std::vector<double>> w{{1.0, 0.0}};
  double tau = 0.5;
  std::size_t n_instances = 100'000;  ///< per replicate, bias sweep
  std::size_t seeds = 10;
  std::vector<std::size_t> n_grid{64, 128, 256, 512, 1024, 2048, 4096};
  double nprocess_lambda = 0.1;
  std::size_t w_grid_points = 128;
  std::size_t pool_size = 100'000;
  double dudley_constant = 24.0;
  double delta = 0.1;
  std::vector<std::size_t> M_grid{32, 64, 128, 256};
  std::vector<int> ksos_dims{1, 2};
  std::vector<double> ksos_cbar{1.0, 0.3};  ///< one per entry of ksos_dims
};

struct CheckConfig {
  std::vector<std::string> checks{"oracle", "p_lambda", "lipschitz", "gauss_tail", "bias", "uw"};
  std::size_t trials = 1000;
};

struct ExperimentConfig {
  std::string name = "default";
  std::uint64_t master_seed = 0;
  std::string output_dir;  ///< empty: derived from the name
  DomainSpec domain;
  std::size_t n_train = 100;
  std::size_t n_test = 1000;
  double box_lo = -1.0;
  double box_hi = 1.0;
  PerturbationSpec perturbation;
  OptimizerConfig optimizer;
  SweepConfig sweep;
  CheckConfig check;
};

struct ConfigIssue {
  std::string path;  ///< dotted key, e.g. "perturbation.lambda"
  std::string message;
};

/// Empty when the configuration is usable.
std::vector<ConfigIssue> validate(const ExperimentConfig& cfg);

/// Parses and validates. Errors carry the position of the offending key.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Complete YAML rendering; parse_config(to_yaml(c)) reproduces c exactly.
std::string to_yaml(const ExperimentConfig& cfg);

}  // namespace perturbopt::harness
