#pragma once

// The four experiment commands. Each writes its files under the output
// directory and finishes with manifest.json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "perturbopt/harness/config.hpp"
#include "perturbopt/theory.hpp"

namespace perturbopt::harness {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitSolver = 3 };

struct RunOptions {
  std::filesystem::path out;
  bool verbose = false;
  bool inject_fault = false;  ///< check: corrupt the linear oracle
  unsigned threads = 0;       ///< recorded in the manifest
};

/// --out if given; otherwise cfg.output_dir, or the experiment name, placed
/// under $PERTURBOPT_OUT when that is set and the path is relative.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& cli_out);

struct GenerateResult {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};
GenerateResult run_generate(const ExperimentConfig& cfg, const RunOptions& opts);

struct TrainResult {
  Vector w;
  double train_risk = 0.0;
  double test_risk = 0.0;
  double baseline_test_risk = 0.0;
  double random_median_test_risk = 0.0;
  double certificate = 0.0;
  bool converged = true;
  bool solver_failed = false;
  std::string failure;
};
/// Needs the dataset written by run_generate in the same directory.
TrainResult run_train(const ExperimentConfig& cfg, const RunOptions& opts);

enum class SweepKind { Bias, NProcess, Ksos };
SweepKind parse_sweep_kind(const std::string& name);
const char* sweep_kind_name(SweepKind k);

struct SweepResult {
  std::vector<BoundCheck> checks;
  std::vector<ScalingFit> fits;
  bool passed = true;
};
SweepResult run_sweep(SweepKind kind, const ExperimentConfig& cfg, const RunOptions& opts);

/// kSoS on f(w) = ||w - a||^2 over [-1, 1]^d for every (dimension, M, seed)
/// of the sweep, with lambda_phi from the schedule.
struct PlantedRun {
  int dim = 0;
  std::size_t M = 0;
  std::size_t seed = 0;
  double lambda_phi = 0.0;
  double arg_error = 0.0;
  double value_error = 0.0;  ///< f(w_hat) - min f
  double c_hat = 0.0;
  double gap = 0.0;
  double certificate = 0.0;
  double grid_error = 0.0;  ///< f(w_hat) minus the minimum over a 10^4-point grid
  bool certified = false;   ///< certificate >= grid_error
  bool converged = false;
};
struct PlantedSummary {
  int dim = 0;
  std::size_t M = 0;
  double median_arg_error = 0.0;
  double median_value_error = 0.0;
  double median_abs_c_hat = 0.0;
};
struct PlantedKsosStudy {
  std::vector<PlantedRun> runs;
  std::vector<PlantedSummary> summary;  ///< per (dimension, M), sweep order
};
Vector planted_point(int d);
PlantedKsosStudy planted_ksos_study(const SweepConfig& sweep, std::uint64_t master_seed,
                                    double delta);

struct CheckResult {
  std::vector<BoundCheck> checks;
  std::vector<std::string> failed;  ///< names of failed checks
  std::vector<std::string> warnings;
};
CheckResult run_check(const ExperimentConfig& cfg, const RunOptions& opts);

// Individual invariant checks used by run_check.
BoundCheck check_oracle_equivalence(std::size_t trials, std::uint64_t seed, bool corrupt);
BoundCheck check_p_lambda_closed_form(std::size_t K, std::uint64_t seed);

}  // namespace perturbopt::harness
