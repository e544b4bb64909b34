#pragma once

// Numerical checks of the error bounds: weak moments of the internal radius,
// perturbation bias, the empirical process, Lipschitz smoothing and the
// Gaussian tail of V_w.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "perturbopt/model.hpp"
#include "perturbopt/perturb.hpp"
#include "perturbopt/problems.hpp"

namespace perturbopt {

inline constexpr double kBoundSlack = 1e-9;

struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;          ///< rhs - lhs
  double lhs_std_error = 0.0;   ///< Monte Carlo error of lhs
  bool passed = false;
  std::map<std::string, double> params;

  /// passed iff lhs <= rhs (1 + 1e-9) + 3 lhs_std_error.
  static BoundCheck make(std::string name, double lhs, double rhs, double lhs_std_error = 0.0,
                         std::map<std::string, double> params = {});
};

struct ScalingFit {
  std::vector<double> x_grid;
  std::vector<double> y_values;  ///< median over replicates
  double fitted_slope = 0.0;     ///< least squares on log y against log x
  double slope_ci_lo = 0.0;
  double slope_ci_hi = 0.0;
  std::vector<double> replicate_slopes;
};

/// Fits log median_r y[r][j] against log x[j]. The interval is the mean of
/// the per-replicate slopes plus or minus 1.96 standard errors. Throws unless
/// x is strictly increasing with >= min_points entries and there are at
/// least min_replicates rows.
ScalingFit fit_scaling(const std::vector<double>& x, const std::vector<std::vector<double>>& y,
                       std::size_t min_points = 4, std::size_t min_replicates = 10);

nlohmann::json to_json(const BoundCheck& c);
nlohmann::json to_json(const ScalingFit& f);

/// Draws `count` instances for replicate `seed`.
using InstanceSampler = std::function<std::vector<Instance>(std::size_t count, std::uint64_t seed)>;
InstanceSampler domain_sampler(const DomainSpec& spec);

// ---------------------------------------------------------------- UW moments

/// Integral of |t|^-tau against the standard normal density.
double gaussian_abs_moment(double tau);

struct UwEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double infinite_share = 0.0;  ///< draws that landed on a cone boundary
  std::optional<double> analytic_bound;  ///< only for epsilon0 > 0
};

/// Average of (rho(psi_w(x) + epsilon0 Z) / sqrt(d))^-tau over instances and
/// `draws` perturbations per instance (one draw when epsilon0 = 0).
UwEstimate uw_moment(const GeneralizedLinearModel& model, const Vector& w,
                     const std::vector<Instance>& instances, double tau, double epsilon0,
                     std::size_t draws = 16, std::uint64_t seed = 0);

// ---------------------------------------------------------- perturbation bias

struct BiasRow {
  double lambda = 0.0;
  double V = 0.0;
  double lhs = 0.0;       ///< |R_lambda - R|
  double lhs_eps0 = 0.0;  ///< |R_lambda - R_eps0|
  double rhs2osc = 0.0;
  double rhs4osc = 0.0;
  double std_error = 0.0;
  bool passed = false;
};

struct BiasReport {
  std::vector<BoundCheck> checks;  ///< two per lambda
  std::vector<BiasRow> rows;
  bool v_monotone = true;
  double osc = 0.0;
  bool exact = false;  ///< every risk came from a closed form
};

struct BiasOptions {
  std::size_t mc_samples = 8192;  ///< used where no closed form exists
  std::uint64_t seed = 0;
};

/// Evaluates both perturbation-bias inequalities on the empirical law of
/// `instances` at each lambda of the grid, with osc taken over the sample.
BiasReport check_bias_bound(const GeneralizedLinearModel& model, const Vector& w,
                            const std::vector<Instance>& instances, const CostOracle& oracle,
                            const std::vector<double>& lambda_grid, double epsilon0,
                            const BiasOptions& options = {});

/// |R_lambda - R_eps0| over the grid for every seed (fresh instances each)
/// and its log-log fit. The check passes when the slope is >= tau - 0.2.
struct BiasScaling {
  ScalingFit fit;
  BoundCheck check;
  std::vector<std::vector<double>> values;  ///< [seed][lambda]
};
BiasScaling bias_scaling(const GeneralizedLinearModel& model, const Vector& w,
                         const InstanceSampler& sampler, const CostOracle& oracle,
                         std::size_t n_instances, const std::vector<std::uint64_t>& seeds,
                         const std::vector<double>& lambda_grid, double epsilon0, double tau,
                         const BiasOptions& options = {});

// ----------------------------------------------------------- empirical process

struct EmpiricalProcessOptions {
  std::size_t pool_size = 100'000;
  double dudley_constant = 24.0;
  double delta = 0.1;
  std::size_t mc_samples = 512;  ///< used where no closed form exists
  double pass_fraction = 0.9;
  std::size_t min_replicates = 10;
  std::uint64_t pool_seed = 0x9e11;
};

/// (ln 2)^-3/4 L_W I_W sqrt(d) + 4 sqrt(ln(8 / delta)), times osc / (lambda sqrt n),
/// with I_W replaced by its volume-ratio bound C d log(R + 1/R).
double empirical_process_rhs(double osc, double lambda, std::size_t n, double lipschitz,
                             double dudley_bound, int d_max, double delta);
double dudley_bound(const ParamSpace& space, double constant);

struct EmpiricalProcessCell {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double delta_hat = 0.0;
  double rhs = 0.0;
  bool passed = false;
};

struct EmpiricalProcessReport {
  ScalingFit fit;
  std::vector<EmpiricalProcessCell> cells;
  BoundCheck bound;  ///< lhs: share of failing cells, rhs: 1 - pass_fraction
  BoundCheck slope;  ///< |slope + 0.5| against 0.15
  double pool_std_error = 0.0;  ///< largest MC error of the reference over the grid
  double osc = 0.0;
  double dudley = 0.0;
};

/// max over w_grid of |R_{n,lambda}(w) - R_pool(w)| for every (seed, n), the
/// reference being a held-out pool drawn with options.pool_seed.
EmpiricalProcessReport check_empirical_process(
    const GeneralizedLinearModel& model, const std::vector<Vector>& w_grid,
    const InstanceSampler& sampler, const CostOracle& oracle, const std::vector<std::size_t>& n_grid,
    double lambda, const std::vector<std::uint64_t>& seeds,
    const EmpiricalProcessOptions& options = {});

/// Regular grid of about `points` parameters filling W.
std::vector<Vector> parameter_grid(const ParamSpace& space, std::size_t points);

// ----------------------------------------------------------- Lipschitz lemmas

struct LipschitzOptions {
  std::size_t mc_samples = 8192;
  double step = 0.25;  ///< probe distance in theta, as a fraction of lambda
  bool check_halving = true;
  std::uint64_t seed = 0;
};

struct LipschitzReport {
  std::vector<BoundCheck> checks;  ///< theta slope, w slope, halving ratio
  double max_theta_slope = 0.0;
  double max_w_slope = 0.0;
  double theta_bound = 0.0;
  double w_bound = 0.0;
};

/// Finite-difference slopes of sum_y |p(y|theta) - p(y|theta')| in theta and
/// in w over random probes, against sqrt(d)/lambda and L_W sqrt(d)/lambda
/// with 5% tolerance. Closed forms where available, otherwise Monte Carlo
/// with the same stream on both ends of a probe.
LipschitzReport check_lipschitz_lemmas(const GeneralizedLinearModel& model,
                                       const std::vector<Instance>& instances, double lambda,
                                       std::size_t trials, const LipschitzOptions& options = {});

// ------------------------------------------------------------ Gaussian tail

/// V(lambda) = P(||Z|| > rho / lambda) against
/// 1[rho / sqrt(d) < lambda^q] + exp(-1 / (10 lambda^(2 (1 - q)))) on the grid.
/// Reports the grid point with the smallest margin.
BoundCheck check_gauss_tail(const std::vector<double>& lambda_grid, double rho, int d, double q);

}  // namespace perturbopt
