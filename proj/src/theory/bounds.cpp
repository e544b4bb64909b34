#include <algorithm>
#include <cmath>
#include <limits>

#include "perturbopt/parallel.hpp"
#include "perturbopt/theory.hpp"

namespace perturbopt {

double gaussian_abs_moment(double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in [0, 1)");
  return std::pow(2.0, -0.5 * tau) * std::tgamma(0.5 * (1.0 - tau)) / std::sqrt(M_PI);
}

UwEstimate uw_moment(const GeneralizedLinearModel& model, const Vector& w,
                     const std::vector<Instance>& instances, double tau, double epsilon0,
                     std::size_t draws, std::uint64_t seed) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  if (!(epsilon0 >= 0.0)) throw InvalidArgument("epsilon0 must be nonnegative");
  if (instances.empty()) throw InvalidArgument("weak moment needs instances");
  if (draws == 0) throw InvalidArgument("weak moment needs at least one draw");
  for (const auto& x : instances) {
    if (!x.polytope->enumerable()) {
      throw EnumerationUnavailable("weak moment needs enumerable solution sets");
    }
  }
  const std::size_t K = epsilon0 > 0.0 ? draws : 1;
  const std::size_t n = instances.size();
  std::vector<double> means(n);
  std::vector<std::size_t> infinite(n, 0);
  parallel_for(n, [&](std::size_t i) {
    const Instance& x = instances[i];
    const double sqrt_d = std::sqrt(static_cast<double>(x.dimension()));
    const Vector theta = model.predict(w, x);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      Vector t = theta;
      if (epsilon0 > 0.0) {
        Stream s(seed, "uw", {x.id, k});
        t += epsilon0 * sample_perturbation(x.dimension(), s);
      }
      const double rho = internal_radius(*x.polytope, t);
      if (rho > 0.0) {
        sum += std::pow(rho / sqrt_d, -tau);
      } else {
        ++infinite[i];
      }
    }
    means[i] = sum / static_cast<double>(K);
  });

  UwEstimate e;
  std::size_t inf_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    e.value += means[i];
    inf_count += infinite[i];
  }
  e.value /= static_cast<double>(n);
  double var = 0.0;
  for (double m : means) var += (m - e.value) * (m - e.value);
  if (n > 1) e.std_error = std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n));
  e.infinite_share = static_cast<double>(inf_count) / static_cast<double>(n * K);
  if (inf_count > 0) e.value = std::numeric_limits<double>::infinity();

  if (epsilon0 > 0.0) {
    double cells = 0.0;
    for (const auto& x : instances) {
      const double m = static_cast<double>(x.polytope->vertex_count());
      cells += m * m * std::pow(static_cast<double>(x.dimension()), tau);
    }
    cells /= static_cast<double>(n);
    e.analytic_bound = gaussian_abs_moment(tau) * std::pow(epsilon0, -tau) * cells;
  }
  return e;
}

namespace {

PerturbationSpec risk_spec(double lambda, std::size_t K, std::uint64_t seed) {
  PerturbationSpec s;
  s.lambda = lambda;
  s.epsilon0 = 0.0;
  s.mc_samples = K;
  s.master_seed = seed;
  return s;
}

}  // namespace

BiasReport check_bias_bound(const GeneralizedLinearModel& model, const Vector& w,
                            const std::vector<Instance>& instances, const CostOracle& oracle,
                            const std::vector<double>& lambda_grid, double epsilon0,
                            const BiasOptions& options) {
  if (lambda_grid.empty()) throw InvalidArgument("empty lambda grid");
  if (!(epsilon0 >= 0.0)) throw InvalidArgument("epsilon0 must be nonnegative");
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw InvalidArgument("lambda must be positive");
    if (l < epsilon0) throw InvalidArgument("lambda grid goes below epsilon0");
  }
  if (instances.empty()) throw InvalidArgument("bias check needs instances");

  BiasReport rep;
  rep.osc = osc_bound(oracle, instances);

  const RiskReport r0 =
      RiskSurface(model, instances, oracle, risk_spec(0.0, options.mc_samples, options.seed),
                  RiskMode::ExactEnum)
          .evaluate(w);
  RiskReport reps = r0;
  if (epsilon0 > 0.0) {
    reps = RiskSurface(model, instances, oracle,
                       risk_spec(epsilon0, options.mc_samples, options.seed), RiskMode::ExactEnum)
               .evaluate(w);
  }
  rep.exact = r0.ties == 0 && (epsilon0 == 0.0 || reps.exact);

  rep.rows.resize(lambda_grid.size());
  for (std::size_t j = 0; j < lambda_grid.size(); ++j) {
    const double lambda = lambda_grid[j];
    const PerturbationSpec spec = risk_spec(lambda, options.mc_samples, options.seed);
    const RiskReport rl =
        RiskSurface(model, instances, oracle, spec, RiskMode::ExactEnum).evaluate(w);
    rep.exact = rep.exact && rl.exact;
    BiasRow& row = rep.rows[j];
    row.lambda = lambda;
    row.V = tail_mass_V(model, w, instances, spec);
    row.lhs = std::abs(rl.value - r0.value);
    row.lhs_eps0 = std::abs(rl.value - reps.value);
    row.rhs2osc = 2.0 * rep.osc * row.V;
    row.rhs4osc = 4.0 * rep.osc * row.V;
    const double se0 = std::hypot(rl.mc_std_error, r0.mc_std_error);
    const double se1 = std::hypot(rl.mc_std_error, reps.mc_std_error);
    row.std_error = std::max(se0, se1);
    const std::map<std::string, double> params{
        {"lambda", lambda}, {"epsilon0", epsilon0}, {"V", row.V}, {"osc", rep.osc}};
    rep.checks.push_back(BoundCheck::make("bias/2osc", row.lhs, row.rhs2osc, se0, params));
    rep.checks.push_back(BoundCheck::make("bias/4osc", row.lhs_eps0, row.rhs4osc, se1, params));
    row.passed = rep.checks[rep.checks.size() - 2].passed && rep.checks.back().passed;
  }

  std::vector<std::size_t> order(lambda_grid.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return lambda_grid[a] < lambda_grid[b]; });
  for (std::size_t j = 1; j < order.size(); ++j) {
    if (rep.rows[order[j]].V < rep.rows[order[j - 1]].V) rep.v_monotone = false;
  }
  return rep;
}

BiasScaling bias_scaling(const GeneralizedLinearModel& model, const Vector& w,
                         const InstanceSampler& sampler, const CostOracle& oracle,
                         std::size_t n_instances, const std::vector<std::uint64_t>& seeds,
                         const std::vector<double>& lambda_grid, double epsilon0, double tau,
                         const BiasOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  BiasScaling out;
  out.values.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t r) {
    const auto xs = sampler(n_instances, seeds[r]);
    BiasOptions o = options;
    o.seed = seeds[r];
    const BiasReport rep = check_bias_bound(model, w, xs, oracle, lambda_grid, epsilon0, o);
    out.values[r].resize(lambda_grid.size());
    for (std::size_t j = 0; j < lambda_grid.size(); ++j) out.values[r][j] = rep.rows[j].lhs_eps0;
  });
  out.fit = fit_scaling(lambda_grid, out.values);
  const double slope = std::isfinite(out.fit.fitted_slope)
                           ? out.fit.fitted_slope
                           : -std::numeric_limits<double>::infinity();
  // slope >= tau - 0.2, written as lhs <= rhs
  out.check = BoundCheck::make("bias/scaling_slope", tau - 0.2, slope, 0.0,
                               {{"tau", tau},
                                {"epsilon0", epsilon0},
                                {"n", static_cast<double>(n_instances)},
                                {"seeds", static_cast<double>(seeds.size())}});
  return out;
}

namespace {

// Distribution over the enumerated vertices; the Monte Carlo path reuses the
// same perturbation streams for a given key.
Vector smoothed_distribution(const SolutionPolytope& poly, const Vector& theta, double lambda,
                             std::size_t K, std::uint64_t seed, std::uint64_t key) {
  if (auto p = p_lambda_closed_form(poly, theta, lambda)) return *p;
  return p_lambda_distribution(poly, theta, lambda, K, seed, key);
}

struct Probe {
  double theta_slope = 0.0;  ///< sum |dp| / ||dtheta||
  double theta_ratio = 0.0;  ///< theta_slope over sqrt(d) / lambda
  double w_ratio = 0.0;      ///< w slope over L_W sqrt(d) / lambda
  double w_slope = 0.0;
};

Probe run_probe(const GeneralizedLinearModel& model, const std::vector<Instance>& instances,
                double lambda, std::size_t t, const LipschitzOptions& o) {
  Stream rng(o.seed, "lipschitz", {t});
  const Instance& x = instances[rng.index(instances.size())];
  const SolutionPolytope& poly = *x.polytope;
  const int d = x.dimension();
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const Vector w = model.space().sample(rng);
  const Vector e = rng.unit_sphere(d);
  const Vector ew = rng.unit_sphere(model.dim());
  const double h = o.step * lambda;
  const Vector theta = model.predict(w, x);

  Probe p;
  const Vector p0 = smoothed_distribution(poly, theta, lambda, o.mc_samples, o.seed, t);
  const Vector p1 = smoothed_distribution(poly, theta + h * e, lambda, o.mc_samples, o.seed, t);
  p.theta_slope = (p1 - p0).cwiseAbs().sum() / h;
  p.theta_ratio = p.theta_slope * lambda / sqrt_d;

  const double L = model.lipschitz_bound();
  const Vector w2 = model.space().project(w + (L > 0.0 ? h / L : h) * ew);
  const double dist = (w2 - w).norm();
  if (dist > 1e-12) {
    const Vector p2 =
        smoothed_distribution(poly, model.predict(w2, x), lambda, o.mc_samples, o.seed, t);
    p.w_slope = (p2 - p0).cwiseAbs().sum() / dist;
    p.w_ratio = L > 0.0 ? p.w_slope * lambda / (L * sqrt_d)
                        : (p.w_slope > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return p;
}

}  // namespace

LipschitzReport check_lipschitz_lemmas(const GeneralizedLinearModel& model,
                                       const std::vector<Instance>& instances, double lambda,
                                       std::size_t trials, const LipschitzOptions& options) {
  if (!(lambda > 0.0)) throw InvalidArgument("Lipschitz check needs lambda > 0");
  if (instances.empty()) throw InvalidArgument("Lipschitz check needs instances");
  if (trials == 0) throw InvalidArgument("Lipschitz check needs probes");

  std::vector<Probe> probes(trials);
  std::vector<Probe> halved(options.check_halving ? trials : 0);
  parallel_for(trials, [&](std::size_t t) {
    probes[t] = run_probe(model, instances, lambda, t, options);
    if (options.check_halving) halved[t] = run_probe(model, instances, 0.5 * lambda, t, options);
  });

  LipschitzReport rep;
  int d_max = 1;
  for (const auto& x : instances) d_max = std::max(d_max, x.dimension());
  rep.theta_bound = std::sqrt(static_cast<double>(d_max)) / lambda;
  rep.w_bound = model.lipschitz_bound() * rep.theta_bound;
  double theta_ratio = 0.0, w_ratio = 0.0;
  for (const auto& p : probes) {
    rep.max_theta_slope = std::max(rep.max_theta_slope, p.theta_slope);
    rep.max_w_slope = std::max(rep.max_w_slope, p.w_slope);
    theta_ratio = std::max(theta_ratio, p.theta_ratio);
    w_ratio = std::max(w_ratio, p.w_ratio);
  }
  const std::map<std::string, double> params{{"lambda", lambda},
                                             {"trials", static_cast<double>(trials)},
                                             {"tolerance", 0.05}};
  // Slopes are normalized by their per-instance constants, so the bound is 1.
  rep.checks.push_back(BoundCheck::make("lipschitz/theta", theta_ratio, 1.05, 0.0, params));
  rep.checks.push_back(BoundCheck::make("lipschitz/w", w_ratio, 1.05, 0.0, params));
  if (options.check_halving) {
    double m = 0.0;
    for (const auto& p : halved) m = std::max(m, p.theta_slope);
    const double ratio = rep.max_theta_slope > 0.0 ? m / rep.max_theta_slope : 0.0;
    rep.checks.push_back(BoundCheck::make("lipschitz/halving", ratio, 2.0 * 1.1, 0.0, params));
  }
  return rep;
}

}  // namespace perturbopt
