#pragma once

// Kernel sum-of-squares global minimization of a deterministic surface over a
// box, its optimality certificate, and simple baseline optimizers.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "perturbopt/common.hpp"
#include "perturbopt/model.hpp"

namespace perturbopt {

using Surface = std::function<double(const Vector&)>;

/// Matern kernel of smoothness nu = s - d/2, the reproducing kernel of H^s
/// on R^d up to norm equivalence. k(w, w) = 1.
double sobolev_kernel(const Vector& w, const Vector& w2, double s, int d,
                      double length_scale = 1.0);

/// Same kernel as a function of the distance r.
double matern(double r, double nu, double length_scale);

/// Gram matrix of the rows of `points` (M x d).
Matrix gram_matrix(const RowMatrix& points, double nu, double length_scale);

struct NewtonSettings {
  int max_outer = 50;
  int max_inner = 100;
  double mu0 = 1.0;
  double mu_factor = 0.2;
  double tolerance = 1e-9;  ///< on the squared Newton decrement
  double mu_stop = 1e-8;    ///< stop once the duality gap mu * M falls below this
};

struct KsosConfig {
  std::size_t M = 64;
  double s = 0.0;           ///< Sobolev smoothness; 0 selects d/2 + 2.5
  double lambda_phi = 1e-3;
  double length_scale = 0.0;  ///< 0 selects diam(W) / 4
  NewtonSettings newton;
  std::uint64_t seed = 0;
  /// Points evaluated in addition to the M uniform samples.
  std::vector<Vector> extra_points;

  double smoothness(int d) const { return s > 0.0 ? s : 0.5 * d + 2.5; }
  /// Throws InvalidArgument on s <= 1 + d/2, M < d + 1 or lambda_phi < 0.
  void validate(int d) const;
};

/// Lower end of the admissible trace-penalty range,
/// cbar * M^(-st/d) * log(M / delta)^(st/d) with st = s - d/2.
double lambda_phi_schedule(std::size_t M, int d, double s, double delta, double cbar);

struct NewtonTraceEntry {
  double mu = 0.0;
  int inner_iterations = 0;
  double decrement = 0.0;
  double c_hat = 0.0;
};

struct KsosResult {
  Vector w_hat;       ///< sum_m alpha_m w_m projected onto W
  Vector w_positive;  ///< same with the positive part of alpha renormalized
  double c_hat = 0.0;
  Vector alpha;
  double value_at_w_hat = 0.0;   ///< surface evaluated at w_hat
  double aposteriori_gap = 0.0;  ///< value_at_w_hat - c_hat
  double trace_term = 0.0;       ///< lambda_phi * tr(B K)
  double trace_BK = 0.0;
  Matrix B;                      ///< coefficients of A in the sampled span
  RowMatrix sampled_points;
  Vector sampled_values;
  double constraint_residual = 0.0;
  double negative_mass = 0.0;    ///< share of |alpha| carried by negative entries
  double min_eigenvalue_B = 0.0;
  bool converged = true;
  int newton_iterations = 0;
  std::vector<NewtonTraceEntry> trace;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const KsosResult& r);

/// Samples M points uniformly in W (stream "ksos/sample"), evaluates the
/// surface on them in parallel and solves the penalized program through a
/// log-barrier damped Newton method on its dual. Of the two multiplier
/// candidates, the one with the lower surface value becomes w_hat.
KsosResult ksos_minimize(const Surface& surface, const ParamSpace& space, const KsosConfig& cfg);

/// Same program on precomputed values.
KsosResult ksos_solve(const RowMatrix& points, const Vector& values, const ParamSpace& space,
                      const KsosConfig& cfg);

/// gap + lambda_phi * (trace bound + Sobolev seminorm bound).
double certificate(const KsosResult& result, double trace_bound, double sobolev_bound,
                   double lambda_phi);

struct SmoothnessBounds {
  double sobolev = 0.0;
  double trace = 0.0;
  bool fallback = false;  ///< a rank-deficient Phi_x forced the supplied values
};

/// Closed-form style bounds for a generalized linear model whose risk is a
/// Gaussian convolution in w. `f_sup` is |f0|_inf. Both bounds follow
/// C * lambda^(-st) with constants evaluated at lambda = 1.
SmoothnessBounds glm_smoothness_estimates(const GeneralizedLinearModel& model,
                                          const std::vector<Instance>& instances, double lambda,
                                          double s, double f_sup,
                                          SmoothnessBounds fallback = {});

/// || D^alpha N(0, C) ||_1 maximized over multi-indices with |alpha| = order.
double gaussian_derivative_l1(const Matrix& covariance, int order);

/// Certificate inputs for f(w) = ||w - a||^2 + c on a box: the trace of its
/// rank-d representation estimated by kernel interpolation on a dense grid,
/// and the sup of its derivatives of order up to ceil(s - d/2).
struct PlantedQuadraticBounds {
  double trace = 0.0;
  double sobolev = 0.0;
};
PlantedQuadraticBounds planted_quadratic_bounds(const Vector& a, const ParamSpace& space,
                                                double s, double length_scale);

enum class BaselineMethod { RandomSearch, NelderMead };

const char* baseline_name(BaselineMethod m);
BaselineMethod parse_baseline(const std::string& name);

struct BaselineResult {
  Vector w;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// Best of `budget` uniform probes, or Nelder-Mead from 5 random starts with
/// the budget split between them. Points are clipped to W before evaluation.
BaselineResult baseline_minimize(const Surface& surface, const ParamSpace& space,
                                 BaselineMethod method, std::size_t budget, std::uint64_t seed);

}  // namespace perturbopt
