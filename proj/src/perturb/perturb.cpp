#include "perturbopt/perturb.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "perturbopt/parallel.hpp"

namespace perturbopt {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

bool has_closed_form(const SolutionPolytope& poly) {
  return poly.enumerable() && poly.vertex_count() == 2;
}

}  // namespace

void PerturbationSpec::validate() const {
  if (!(epsilon0 >= 0.0) || !std::isfinite(epsilon0)) {
    throw InvalidArgument("epsilon0 must be finite and nonnegative");
  }
  if (!(lambda >= epsilon0) || !std::isfinite(lambda)) {
    throw InvalidArgument("lambda must be finite and at least epsilon0");
  }
  if (mc_samples < 1) throw InvalidArgument("at least one perturbation sample is required");
}

Vector sample_perturbation(int d, Stream& stream) {
  if (d < 1) throw InvalidArgument("perturbation dimension must be positive");
  const double scale = 1.0 / std::sqrt(double(d));
  Vector z(d);
  for (int j = 0; j < d; ++j) z[j] = scale * stream.gaussian();
  return z;
}

Stream perturbation_stream(std::uint64_t master_seed, std::uint64_t instance_key,
                           std::uint64_t k) {
  return Stream(master_seed, "perturb", {instance_key, k});
}

Estimate p_lambda(const SolutionPolytope& poly, const Vector& theta, const Vector& y,
                  const PerturbationSpec& spec, std::uint64_t instance_key) {
  spec.validate();
  if (spec.lambda <= 0.0) throw InvalidArgument("p_lambda needs lambda > 0; use p0 at zero");
  if (y.size() != poly.dimension()) throw DimensionError("solution has the wrong dimension");
  std::size_t hits = 0;
  for (std::size_t k = 0; k < spec.mc_samples; ++k) {
    Stream s = perturbation_stream(spec.master_seed, instance_key, k);
    const Vector shifted = theta + spec.lambda * sample_perturbation(poly.dimension(), s);
    if (linear_oracle(poly, shifted).y == y) ++hits;
  }
  const double K = static_cast<double>(spec.mc_samples);
  const double p = hits / K;
  return {p, std::sqrt(p * (1.0 - p) / K)};
}

Vector p_lambda_distribution(const SolutionPolytope& poly, const Vector& theta, double lambda,
                             std::size_t samples, std::uint64_t master_seed,
                             std::uint64_t instance_key, Vector* std_errors) {
  if (lambda <= 0.0) throw InvalidArgument("p_lambda needs lambda > 0");
  if (samples == 0) throw InvalidArgument("at least one sample is required");
  Vector p = Vector::Zero(static_cast<Eigen::Index>(poly.vertex_count()));
  for (std::size_t k = 0; k < samples; ++k) {
    Stream s = perturbation_stream(master_seed, instance_key, k);
    const Vector shifted = theta + lambda * sample_perturbation(poly.dimension(), s);
    const auto idx = poly.index_of(linear_oracle(poly, shifted).y);
    p[static_cast<Eigen::Index>(*idx)] += 1.0;
  }
  const double K = static_cast<double>(samples);
  p /= K;
  if (std_errors) *std_errors = (p.array() * (1.0 - p.array()) / K).sqrt().matrix();
  return p;
}

std::optional<Vector> p_lambda_closed_form(const SolutionPolytope& poly, const Vector& theta,
                                           double lambda) {
  if (!has_closed_form(poly)) return std::nullopt;
  if (lambda <= 0.0) throw InvalidArgument("p_lambda needs lambda > 0");
  if (theta.size() != poly.dimension()) throw DimensionError("direction has the wrong dimension");
  const Vector diff = poly.vertex(0) - poly.vertex(1);
  const double scaled =
      diff.dot(theta) * std::sqrt(double(poly.dimension())) / (lambda * diff.norm());
  Vector p(2);
  p[0] = normal_cdf(scaled);
  p[1] = normal_cdf(-scaled);
  return p;
}

const char* risk_mode_name(RiskMode mode) {
  return mode == RiskMode::MonteCarlo ? "monte_carlo" : "exact_enum";
}

nlohmann::json to_json(const RiskReport& r) {
  return {{"value", r.value},
          {"mc_std_error", r.mc_std_error},
          {"n_instances", r.n_instances},
          {"K", r.K},
          {"lambda", r.lambda},
          {"epsilon0", r.epsilon0},
          {"mode", risk_mode_name(r.mode)},
          {"exact", r.exact},
          {"ties", r.ties},
          {"seed_trace", r.seed_trace}};
}

RiskSurface::RiskSurface(const GeneralizedLinearModel& model, std::vector<Instance> instances,
                         CostOracle oracle, PerturbationSpec spec, RiskMode mode)
    : model_(model),
      instances_(std::move(instances)),
      oracle_(std::move(oracle)),
      spec_(spec),
      mode_(mode) {
  spec_.validate();
  if (instances_.empty()) throw InvalidArgument("risk needs at least one instance");
  for (const Instance& x : instances_) {
    if (x.features.cols() != model_.dim()) throw DimensionError("feature width differs from W");
  }
  const std::size_t n = instances_.size();
  bank_.resize(n);
  cost_table_.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const Instance& x = instances_[i];
    const int d = x.dimension();
    if (x.polytope->enumerable()) {
      const RowMatrix& v = x.polytope->vertices();
      auto& table = cost_table_[i];
      table.resize(static_cast<std::size_t>(v.rows()));
      for (Eigen::Index r = 0; r < v.rows(); ++r) {
        table[static_cast<std::size_t>(r)] = eval_cost(oracle_, v.row(r).transpose(), x);
      }
    }
    const bool closed = mode_ == RiskMode::ExactEnum && has_closed_form(*x.polytope);
    if (spec_.lambda > 0.0 && !closed) {
      RowMatrix z(static_cast<Eigen::Index>(spec_.mc_samples), d);
      for (std::size_t k = 0; k < spec_.mc_samples; ++k) {
        Stream s = perturbation_stream(spec_.master_seed, x.id, k);
        z.row(static_cast<Eigen::Index>(k)) = sample_perturbation(d, s).transpose();
      }
      bank_[i] = std::move(z);
    }
  });
}

double RiskSurface::cost_of(std::size_t i, const Vector& y) const {
  const Instance& x = instances_[i];
  if (!cost_table_[i].empty()) {
    if (const auto idx = x.polytope->index_of(y)) return cost_table_[i][*idx];
  }
  return eval_cost(oracle_, y, x);
}

Estimate RiskSurface::instance_risk(std::size_t i, const Vector& theta, bool* tie) const {
  const Instance& x = instances_[i];
  const SolutionPolytope& poly = *x.polytope;
  *tie = false;
  if (spec_.lambda == 0.0) {
    const OracleResult best = linear_oracle(poly, theta);
    if (!best.tie || !poly.enumerable()) return {cost_of(i, best.y), 0.0};
    *tie = true;
    Stream s(spec_.master_seed, "p0", {x.id});
    const auto measure = p0(poly, theta, s);
    Estimate e;
    double var = 0.0;
    for (const auto& atom : measure.support) {
      const double f = cost_table_[i][atom.index];
      e.value += atom.probability * f;
      var += atom.std_error * atom.std_error * f * f;
    }
    e.std_error = std::sqrt(var);
    return e;
  }
  if (mode_ == RiskMode::ExactEnum) {
    if (const auto p = p_lambda_closed_form(poly, theta, spec_.lambda)) {
      const double f0 = cost_table_[i][0];
      const double f1 = cost_table_[i][1];
      return {f1 + (*p)[0] * (f0 - f1), 0.0};
    }
  }
  const RowMatrix& z = bank_[i];
  double sum = 0.0;
  double sum_sq = 0.0;
  Vector shifted(theta.size());
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    shifted = theta + spec_.lambda * z.row(k).transpose();
    const double f = cost_of(i, linear_oracle(poly, shifted).y);
    sum += f;
    sum_sq += f * f;
  }
  const double K = static_cast<double>(z.rows());
  const double mean = sum / K;
  const double var = K > 1 ? std::max(0.0, (sum_sq - K * mean * mean) / (K - 1)) : 0.0;
  return {mean, std::sqrt(var / K)};
}

std::vector<Estimate> RiskSurface::per_instance(const Vector& w) const {
  if (!model_.space().contains(w)) throw InvalidArgument("parameter lies outside W");
  std::vector<Estimate> out(instances_.size());
  std::vector<char> ties(instances_.size(), 0);
  parallel_for(instances_.size(), [&](std::size_t i) {
    bool tie = false;
    out[i] = instance_risk(i, instances_[i].features * w, &tie);
    ties[i] = tie;
  });
  return out;
}

RiskReport RiskSurface::evaluate(const Vector& w) const {
  if (!model_.space().contains(w)) throw InvalidArgument("parameter lies outside W");
  const std::size_t n = instances_.size();
  std::vector<Estimate> parts(n);
  std::vector<char> ties(n, 0);
  parallel_for(n, [&](std::size_t i) {
    bool tie = false;
    parts[i] = instance_risk(i, instances_[i].features * w, &tie);
    ties[i] = tie;
  });
  RiskReport r;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.value += parts[i].value;
    var += parts[i].std_error * parts[i].std_error;
    r.ties += ties[i] ? 1 : 0;
  }
  r.value /= static_cast<double>(n);
  r.mc_std_error = std::sqrt(var) / static_cast<double>(n);
  r.n_instances = n;
  r.lambda = spec_.lambda;
  r.epsilon0 = spec_.epsilon0;
  r.mode = mode_;
  r.exact = spec_.lambda == 0.0 ? r.ties == 0 : false;
  if (mode_ == RiskMode::ExactEnum && spec_.lambda > 0.0) {
    r.exact = std::all_of(instances_.begin(), instances_.end(),
                          [](const Instance& x) { return has_closed_form(*x.polytope); });
  }
  r.K = r.exact ? 0 : spec_.mc_samples;
  std::ostringstream trace;
  trace << "master_seed=" << spec_.master_seed << ";label=perturb;key=(instance_id,k);K="
        << spec_.mc_samples;
  r.seed_trace = trace.str();
  return r;
}

RiskReport regularized_risk(const GeneralizedLinearModel& model, const Vector& w,
                            const std::vector<Instance>& instances, const CostOracle& oracle,
                            const PerturbationSpec& spec, RiskMode mode) {
  return RiskSurface(model, instances, oracle, spec, mode).evaluate(w);
}

double chi_tail(int d, double t) {
  if (d < 1) throw InvalidArgument("chi tail needs d >= 1");
  if (!(t > 0.0)) return 1.0;
  if (std::isinf(t)) return 0.0;
  return boost::math::gamma_q(0.5 * d, 0.5 * d * t * t);
}

double tail_mass_V(const GeneralizedLinearModel& model, const Vector& w,
                   const std::vector<Instance>& instances, const PerturbationSpec& spec) {
  if (!(spec.lambda > 0.0)) throw InvalidArgument("tail mass needs lambda > 0");
  if (instances.empty()) throw InvalidArgument("tail mass needs at least one instance");
  std::vector<double> tails(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    const Instance& x = instances[i];
    const double rho = internal_radius(*x.polytope, model.predict(w, x));
    tails[i] = chi_tail(x.dimension(), rho / spec.lambda);
  });
  double sum = 0.0;
  for (double t : tails) sum += t;
  return sum / static_cast<double>(instances.size());
}

}  // namespace perturbopt
