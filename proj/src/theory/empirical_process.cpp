#include <algorithm>
#include <cmath>
#include <limits>

#include "perturbopt/parallel.hpp"
#include "perturbopt/theory.hpp"

namespace perturbopt {

double dudley_bound(const ParamSpace& space, double constant) {
  const double R = space.enclosing_radius();
  if (!(R > 0.0)) throw InvalidArgument("parameter box is degenerate");
  return constant * space.dim() * std::log(R + 1.0 / R);
}

double empirical_process_rhs(double osc, double lambda, std::size_t n, double lipschitz,
                             double dudley, int d_max, double delta) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (n == 0) throw InvalidArgument("sample size must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  const double chaining = std::pow(std::log(2.0), -0.75) * lipschitz * dudley *
                          std::sqrt(static_cast<double>(d_max));
  const double deviation = 4.0 * std::sqrt(std::log(8.0 / delta));
  return osc / (lambda * std::sqrt(static_cast<double>(n))) * (chaining + deviation);
}

std::vector<Vector> parameter_grid(const ParamSpace& space, std::size_t points) {
  const int d = space.dim();
  if (points == 0) throw InvalidArgument("grid needs points");
  // Spread the prime factors of `points` over the axes so the count is exact
  // when the factors allow a balanced split.
  std::vector<std::size_t> counts(static_cast<std::size_t>(d), 1);
  std::vector<std::size_t> factors;
  std::size_t rest = points;
  for (std::size_t p = 2; p * p <= rest; ++p) {
    while (rest % p == 0) {
      factors.push_back(p);
      rest /= p;
    }
  }
  if (rest > 1) factors.push_back(rest);
  std::sort(factors.rbegin(), factors.rend());
  for (std::size_t f : factors) *std::min_element(counts.begin(), counts.end()) *= f;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*hi > 4 * *lo) {
    const auto k = static_cast<std::size_t>(
        std::max(1.0, std::floor(std::pow(static_cast<double>(points), 1.0 / d) + 1e-9)));
    std::fill(counts.begin(), counts.end(), k);
  }

  std::size_t total = 1;
  for (std::size_t c : counts) total *= c;
  std::vector<Vector> grid;
  grid.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Vector w(d);
    std::size_t r = flat;
    for (int j = 0; j < d; ++j) {
      const std::size_t c = counts[static_cast<std::size_t>(j)];
      const std::size_t i = r % c;
      r /= c;
      const double t = c == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(c - 1);
      w[j] = space.lower()[j] + t * (space.upper()[j] - space.lower()[j]);
    }
    grid.push_back(std::move(w));
  }
  return grid;
}

namespace {

double declared_osc(const CostOracle& oracle) {
  if (oracle.bounds.empty()) return std::numeric_limits<double>::quiet_NaN();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [cell, b] : oracle.bounds) {
    lo = std::min(lo, b.lower);
    hi = std::max(hi, b.upper);
  }
  return hi - lo;
}

}  // namespace

EmpiricalProcessReport check_empirical_process(
    const GeneralizedLinearModel& model, const std::vector<Vector>& w_grid,
    const InstanceSampler& sampler, const CostOracle& oracle, const std::vector<std::size_t>& n_grid,
    double lambda, const std::vector<std::uint64_t>& seeds, const EmpiricalProcessOptions& options) {
  if (w_grid.empty()) throw InvalidArgument("empty parameter grid");
  if (n_grid.empty()) throw InvalidArgument("empty sample-size grid");
  if (seeds.empty()) throw InvalidArgument("no seeds");
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  const std::size_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  if (options.pool_size < 10 * n_max) {
    throw InvalidArgument("reference pool must hold at least 10x the largest sample size");
  }

  PerturbationSpec spec;
  spec.lambda = lambda;
  spec.epsilon0 = 0.0;
  spec.mc_samples = options.mc_samples;
  spec.master_seed = options.pool_seed;

  EmpiricalProcessReport rep;
  const auto pool_instances = sampler(options.pool_size, options.pool_seed);
  int d_max = 1;
  for (const auto& x : pool_instances) d_max = std::max(d_max, x.dimension());
  rep.osc = declared_osc(oracle);
  if (!std::isfinite(rep.osc)) rep.osc = osc_bound(oracle, pool_instances);
  rep.dudley = dudley_bound(model.space(), options.dudley_constant);

  const RiskSurface pool(model, pool_instances, oracle, spec, RiskMode::ExactEnum);
  std::vector<double> reference(w_grid.size());
  std::vector<double> pool_error(w_grid.size());
  parallel_for(w_grid.size(), [&](std::size_t j) {
    const auto parts = pool.per_instance(w_grid[j]);
    double mean = 0.0;
    for (const auto& e : parts) mean += e.value;
    mean /= static_cast<double>(parts.size());
    double var = 0.0;
    for (const auto& e : parts) var += (e.value - mean) * (e.value - mean);
    var /= static_cast<double>(parts.size() - 1);
    reference[j] = mean;
    pool_error[j] = std::sqrt(var / static_cast<double>(parts.size()));
  });
  rep.pool_std_error = *std::max_element(pool_error.begin(), pool_error.end());

  const std::size_t S = seeds.size();
  const std::size_t N = n_grid.size();
  rep.cells.resize(S * N);
  parallel_for(S * N, [&](std::size_t c) {
    const std::size_t s = c / N;
    const std::size_t n = n_grid[c % N];
    const auto xs = sampler(n, derive_seed(seeds[s], "nprocess/sample", {n}));
    PerturbationSpec cell_spec = spec;
    cell_spec.master_seed = seeds[s];
    const RiskSurface surface(model, xs, oracle, cell_spec, RiskMode::ExactEnum);
    double worst = 0.0;
    for (std::size_t j = 0; j < w_grid.size(); ++j) {
      worst = std::max(worst, std::abs(surface.evaluate(w_grid[j]).value - reference[j]));
    }
    EmpiricalProcessCell& cell = rep.cells[c];
    cell.seed = seeds[s];
    cell.n = n;
    cell.delta_hat = worst;
    cell.rhs = empirical_process_rhs(rep.osc, lambda, n, model.lipschitz_bound(), rep.dudley,
                                     d_max, options.delta);
    cell.passed = worst <= cell.rhs * (1.0 + kBoundSlack) + 3.0 * rep.pool_std_error;
  });

  std::vector<double> x(N);
  for (std::size_t k = 0; k < N; ++k) x[k] = static_cast<double>(n_grid[k]);
  std::vector<std::vector<double>> y(S, std::vector<double>(N));
  std::size_t failed = 0;
  for (std::size_t c = 0; c < S * N; ++c) {
    y[c / N][c % N] = rep.cells[c].delta_hat;
    failed += rep.cells[c].passed ? 0 : 1;
  }
  rep.fit = fit_scaling(x, y, 4, options.min_replicates);

  const std::map<std::string, double> params{{"lambda", lambda},
                                             {"delta", options.delta},
                                             {"dudley_constant", options.dudley_constant},
                                             {"dudley_bound", rep.dudley},
                                             {"osc", rep.osc},
                                             {"lipschitz", model.lipschitz_bound()},
                                             {"pool_size", static_cast<double>(options.pool_size)},
                                             {"pool_std_error", rep.pool_std_error}};
  rep.bound = BoundCheck::make("nprocess/rhs_coverage",
                               static_cast<double>(failed) / static_cast<double>(S * N),
                               1.0 - options.pass_fraction, 0.0, params);
  const double slope_gap = std::isfinite(rep.fit.fitted_slope)
                               ? std::abs(rep.fit.fitted_slope + 0.5)
                               : std::numeric_limits<double>::infinity();
  rep.slope = BoundCheck::make("nprocess/slope", slope_gap, 0.15, 0.0, params);
  return rep;
}

}  // namespace perturbopt
