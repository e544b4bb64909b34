#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "perturbopt/parallel.hpp"
#include "perturbopt/theory.hpp"

namespace perturbopt {

BoundCheck BoundCheck::make(std::string name, double lhs, double rhs, double lhs_std_error,
                            std::map<std::string, double> params) {
  BoundCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.margin = rhs - lhs;
  c.lhs_std_error = lhs_std_error;
  c.params = std::move(params);
  c.passed = lhs <= rhs * (1.0 + kBoundSlack) + 3.0 * lhs_std_error;
  return c;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Least-squares slope of log y on log x over the points with y > 0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (y[j] > 0.0 && std::isfinite(y[j])) {
      lx.push_back(std::log(x[j]));
      ly.push_back(std::log(y[j]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < lx.size(); ++j) {
    sxy += (lx[j] - mx) * (ly[j] - my);
    sxx += (lx[j] - mx) * (lx[j] - mx);
  }
  return sxy / sxx;
}

}  // namespace

ScalingFit fit_scaling(const std::vector<double>& x, const std::vector<std::vector<double>>& y,
                       std::size_t min_points, std::size_t min_replicates) {
  if (x.size() < min_points) {
    throw InvalidArgument("scaling fit needs at least " + std::to_string(min_points) +
                          " grid points");
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] > 0.0)) throw InvalidArgument("scaling grid must be positive");
    if (j > 0 && !(x[j] > x[j - 1])) throw InvalidArgument("scaling grid must increase strictly");
  }
  if (y.size() < min_replicates) {
    throw InvalidArgument("scaling fit needs at least " + std::to_string(min_replicates) +
                          " replicates");
  }
  for (const auto& row : y) {
    if (row.size() != x.size()) throw DimensionError("replicate length differs from the grid");
  }

  ScalingFit f;
  f.x_grid = x;
  f.y_values.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    std::vector<double> col(y.size());
    for (std::size_t r = 0; r < y.size(); ++r) col[r] = y[r][j];
    f.y_values[j] = median(col);
  }
  f.fitted_slope = loglog_slope(x, f.y_values);

  std::vector<double> finite;
  for (const auto& row : y) {
    const double s = loglog_slope(x, row);
    f.replicate_slopes.push_back(s);
    if (std::isfinite(s)) finite.push_back(s);
  }
  if (finite.size() >= 2) {
    const double mean = std::accumulate(finite.begin(), finite.end(), 0.0) / finite.size();
    double var = 0.0;
    for (double s : finite) var += (s - mean) * (s - mean);
    var /= static_cast<double>(finite.size() - 1);
    const double half = 1.96 * std::sqrt(var / finite.size());
    f.slope_ci_lo = mean - half;
    f.slope_ci_hi = mean + half;
  } else {
    f.slope_ci_lo = f.slope_ci_hi = f.fitted_slope;
  }
  return f;
}

nlohmann::json to_json(const BoundCheck& c) {
  return {{"name", c.name},     {"lhs", c.lhs},
          {"rhs", c.rhs},       {"margin", c.margin},
          {"lhs_std_error", c.lhs_std_error},
          {"passed", c.passed}, {"params", c.params}};
}

nlohmann::json to_json(const ScalingFit& f) {
  return {{"x_grid", f.x_grid},
          {"y_values", f.y_values},
          {"fitted_slope", f.fitted_slope},
          {"slope_ci", {f.slope_ci_lo, f.slope_ci_hi}},
          {"replicate_slopes", f.replicate_slopes}};
}

InstanceSampler domain_sampler(const DomainSpec& spec) {
  return [spec](std::size_t count, std::uint64_t seed) {
    return generate_instances(spec, count, seed);
  };
}

BoundCheck check_gauss_tail(const std::vector<double>& lambda_grid, double rho, int d, double q) {
  if (lambda_grid.empty()) throw InvalidArgument("empty lambda grid");
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("q must lie in (0, 1)");
  if (!(rho >= 0.0)) throw InvalidArgument("rho must be nonnegative");
  if (d < 1) throw InvalidArgument("dimension must be positive");
  BoundCheck worst;
  bool first = true;
  for (double lambda : lambda_grid) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw InvalidArgument("lambda must lie in (0, 1)");
    const double V = chi_tail(d, rho / lambda);
    const double near = rho / std::sqrt(static_cast<double>(d)) < std::pow(lambda, q) ? 1.0 : 0.0;
    const double rhs = near + std::exp(-1.0 / (10.0 * std::pow(lambda, 2.0 * (1.0 - q))));
    BoundCheck c = BoundCheck::make("gauss_tail", V, rhs, 0.0,
                                    {{"lambda", lambda}, {"rho", rho}, {"d", d}, {"q", q}});
    if (first || (worst.passed && !c.passed) ||
        (c.passed == worst.passed && c.margin < worst.margin)) {
      worst = c;
      first = false;
    }
  }
  return worst;
}

}  // namespace perturbopt
