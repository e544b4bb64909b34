#pragma once

// Gaussian perturbation of oracle directions: p_lambda, regularized risks
// with common random numbers, and the tail functional V_w(lambda).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "perturbopt/model.hpp"
#include "perturbopt/oracle.hpp"
#include "perturbopt/problems.hpp"
#include "perturbopt/rng.hpp"

namespace perturbopt {

struct PerturbationSpec {
  double lambda = 0.1;
  double epsilon0 = 1e-3;
  std::size_t mc_samples = 512;
  std::uint64_t master_seed = 0;

  /// Throws InvalidArgument unless lambda >= epsilon0 >= 0 and K >= 1.
  void validate() const;
  PerturbationSpec with_lambda(double l) const {
    PerturbationSpec s = *this;
    s.lambda = l;
    return s;
  }
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// z with sqrt(d) z ~ N(0, I_d).
Vector sample_perturbation(int d, Stream& stream);

/// Stream of the k-th perturbation of the instance with the given key. Does
/// not depend on the parameter w, which makes risk surfaces deterministic.
Stream perturbation_stream(std::uint64_t master_seed, std::uint64_t instance_key, std::uint64_t k);

/// Monte Carlo estimate of E_Z[p0(y | theta + lambda Z)].
Estimate p_lambda(const SolutionPolytope& poly, const Vector& theta, const Vector& y,
                  const PerturbationSpec& spec, std::uint64_t instance_key = 0);

/// Monte Carlo distribution over the enumerated vertices. `std_errors`
/// receives per-vertex binomial standard errors when given.
Vector p_lambda_distribution(const SolutionPolytope& poly, const Vector& theta, double lambda,
                             std::size_t samples, std::uint64_t master_seed,
                             std::uint64_t instance_key, Vector* std_errors = nullptr);

/// Exact distribution when the solution set has two vertices:
/// p(a) = Phi(<a - b, theta> sqrt(d) / (lambda ||a - b||)).
std::optional<Vector> p_lambda_closed_form(const SolutionPolytope& poly, const Vector& theta,
                                           double lambda);

enum class RiskMode { MonteCarlo, ExactEnum };

const char* risk_mode_name(RiskMode mode);

struct RiskReport {
  double value = 0.0;
  double mc_std_error = 0.0;
  std::size_t n_instances = 0;
  std::size_t K = 0;
  double lambda = 0.0;
  double epsilon0 = 0.0;
  RiskMode mode = RiskMode::MonteCarlo;
  bool exact = false;          ///< every instance used a closed form
  std::size_t ties = 0;        ///< instances averaged through the p0 measure
  std::string seed_trace;
};

nlohmann::json to_json(const RiskReport& r);

/// w -> R_{n,lambda}(w) on a fixed instance set. Perturbations are drawn per
/// (instance, k) and cached, so repeated evaluations share them exactly.
class RiskSurface {
 public:
  RiskSurface(const GeneralizedLinearModel& model, std::vector<Instance> instances,
              CostOracle oracle, PerturbationSpec spec, RiskMode mode = RiskMode::MonteCarlo);

  RiskReport evaluate(const Vector& w) const;
  double operator()(const Vector& w) const { return evaluate(w).value; }

  /// Per-instance expected costs at w (same conventions as evaluate).
  std::vector<Estimate> per_instance(const Vector& w) const;

  const std::vector<Instance>& instances() const { return instances_; }
  const PerturbationSpec& spec() const { return spec_; }
  const GeneralizedLinearModel& model() const { return model_; }
  const CostOracle& oracle() const { return oracle_; }

 private:
  Estimate instance_risk(std::size_t i, const Vector& theta, bool* tie) const;
  double cost_of(std::size_t i, const Vector& y) const;

  GeneralizedLinearModel model_;
  std::vector<Instance> instances_;
  CostOracle oracle_;
  PerturbationSpec spec_;
  RiskMode mode_;
  std::vector<RowMatrix> bank_;          ///< K x d(G) perturbations per instance
  std::vector<std::vector<double>> cost_table_;  ///< f0 per enumerated vertex
};

RiskReport regularized_risk(const GeneralizedLinearModel& model, const Vector& w,
                            const std::vector<Instance>& instances, const CostOracle& oracle,
                            const PerturbationSpec& spec, RiskMode mode = RiskMode::MonteCarlo);

/// P(||Z|| > t) where sqrt(d) ||Z|| is chi with d degrees of freedom.
double chi_tail(int d, double t);

/// V_w(lambda) = mean over instances of P(||Z|| > rho(psi_w(x)) / lambda).
double tail_mass_V(const GeneralizedLinearModel& model, const Vector& w,
                   const std::vector<Instance>& instances, const PerturbationSpec& spec);

}  // namespace perturbopt
