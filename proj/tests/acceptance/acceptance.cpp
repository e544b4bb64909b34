// Acceptance run: one PASS/FAIL line per criterion. Criteria 1-10 are run
// once with one worker thread and timed; criterion 11 repeats them with 4 and
// 8 workers and compares fingerprints of every numeric output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "perturbopt/harness/commands.hpp"
#include "perturbopt/harness/io.hpp"
#include "perturbopt/ksos.hpp"
#include "perturbopt/oracle.hpp"
#include "perturbopt/parallel.hpp"
#include "perturbopt/theory.hpp"

#ifndef PERTURBOPT_CONFIG_DIR
#error "PERTURBOPT_CONFIG_DIR must point at the configs directory"
#endif

using namespace perturbopt;
namespace h = perturbopt::harness;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240607;

struct Outcome {
  bool passed = false;
  std::string detail;
  std::string fingerprint;  ///< every number the criterion depends on
};

class Print {
 public:
  Print& operator<<(double v) {
    text_ += h::format_number(v) + ' ';
    return *this;
  }
  Print& operator<<(const std::string& s) {
    text_ += s + ' ';
    return *this;
  }
  Print& operator<<(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) *this << v[i];
    return *this;
  }
  Print& operator<<(const BoundCheck& c) {
    return *this << c.name << c.lhs << c.rhs << c.lhs_std_error << double(c.passed);
  }
  Print& operator<<(const ScalingFit& f) {
    *this << f.fitted_slope << f.slope_ci_lo << f.slope_ci_hi;
    for (double y : f.y_values) *this << y;
    return *this;
  }
  std::string str() const { return text_; }

 private:
  std::string text_;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Vector gaussian(Stream& rng, int d) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.gaussian();
  return v;
}

Dag chain_with_shortcuts(Stream& rng, int nodes, std::size_t max_arcs) {
  Dag g;
  g.n_nodes = nodes;
  g.sink = nodes - 1;
  for (int i = 0; i + 1 < nodes; ++i) g.arcs.emplace_back(i, i + 1);
  for (int tries = 0; tries < 50 && g.arcs.size() < max_arcs; ++tries) {
    const int i = int(rng.index(std::size_t(nodes - 2)));
    const int j = i + 2 + int(rng.index(std::size_t(nodes - i - 2)));
    if (std::find(g.arcs.begin(), g.arcs.end(), std::make_pair(i, j)) == g.arcs.end()) {
      g.arcs.emplace_back(i, j);
    }
  }
  return g;
}

DomainSpec contextual() {
  DomainSpec s;
  s.domain = Domain::Contextual;
  return s;
}

DomainSpec scheduling(int jobs) {
  DomainSpec s;
  s.domain = Domain::Scheduling;
  s.sizes = {jobs};
  return s;
}

// ----------------------------------------------------------------------- 1

Outcome oracle_equivalence() {
  const BoundCheck c = h::check_oracle_equivalence(1000, derive_seed(kSeed, "c1"), false);
  Outcome o;
  o.passed = c.passed;
  o.detail = fmt("%.0f mismatches in 1000 directions (Perm(2..6) and DAGs with <= 10 arcs)", c.lhs);
  o.fingerprint = (Print() << c).str();
  return o;
}

// ----------------------------------------------------------------------- 2

// Distance along u at which the oracle output first changes, by bisection.
double exit_distance(const SolutionPolytope& p, const Vector& theta, const Vector& u,
                     const Vector& y) {
  double lo = 0.0, hi = theta.norm() + 1.0;
  while (linear_oracle(p, theta + hi * u).y == y) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6 * (theta.norm() + 1.0)) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (linear_oracle(p, theta + mid * u).y == y ? lo : hi) = mid;
  }
  return lo;
}

Outcome geometry() {
  Stream rng(kSeed, "c2");
  const auto perm = SolutionPolytope::permutahedron(4);
  double worst = 0.0;
  std::size_t homogeneity_failures = 0;
  Print fp;
  for (int t = 0; t < 200; ++t) {
    const SolutionPolytope p =
        t % 2 == 0 ? perm : SolutionPolytope::dag_paths(chain_with_shortcuts(rng, 6, 10));
    const Vector theta = gaussian(rng, p.dimension());
    const Vector y = linear_oracle(p, theta).y;
    // Directions towards every other vertex, then random ones up to 100.
    std::vector<Vector> dirs;
    for (std::size_t i = 0; i < p.vertex_count() && dirs.size() < 100; ++i) {
      const Vector diff = p.vertex(i) - y;
      if (diff.norm() > 0.0) dirs.push_back(diff.normalized());
    }
    while (dirs.size() < 100) dirs.push_back(rng.unit_sphere(p.dimension()));
    double sampled = std::numeric_limits<double>::infinity();
    for (const auto& u : dirs) sampled = std::min(sampled, exit_distance(p, theta, u, y));
    const double rho = internal_radius(p, theta);
    worst = std::max(worst, std::abs(sampled - rho));
    for (int k = -4; k <= 4; ++k) {
      const double c = std::ldexp(1.0, k);
      homogeneity_failures += internal_radius(p, c * theta) != c * rho;
    }
    fp << rho << sampled;
  }
  Outcome o;
  o.passed = worst <= 1e-6 && homogeneity_failures == 0;
  o.detail = fmt("max |rho - sampled radius| = %.2e over 200 directions; %.0f homogeneity failures",
                 worst, double(homogeneity_failures));
  o.fingerprint = fp.str();
  return o;
}

// ----------------------------------------------------------------------- 3

Outcome p_lambda_closed_form() {
  const auto t0 = std::chrono::steady_clock::now();
  const BoundCheck c = h::check_p_lambda_closed_form(8192, derive_seed(kSeed, "c3"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  PerturbationSpec spec;
  spec.lambda = 1.0;
  spec.epsilon0 = 0.0;
  spec.mc_samples = 8192;
  spec.master_seed = derive_seed(kSeed, "c3/example");
  const Estimate e = p_lambda(*contextual_polytope(), Vector::Constant(1, 0.3), Vector::Ones(1), spec);
  const bool example = std::abs(e.value - 0.61791) <= 3.0 * e.std_error &&
                       std::abs(normal_cdf(0.3) - 0.61791) < 5e-6;
  Outcome o;
  o.passed = c.passed && example && secs < 5.0;
  o.detail = fmt("worst |p - Phi(theta/lambda)| = %.2f std errors on 5x5 grid; p(1|0.3, 1) = %.4f; %.2f s",
                 c.lhs, e.value, secs);
  o.fingerprint = (Print() << c << e.value).str();
  return o;
}

// ----------------------------------------------------------------------- 4

Outcome bias_bounds() {
  std::size_t pairs = 0, violations = 0, non_monotone = 0;
  Print fp;
  for (const DomainSpec& spec : {contextual(), scheduling(2)}) {
    const auto model = GeneralizedLinearModel::for_domain(spec, ParamSpace::box(spec.feature_dimension()));
    const auto oracle = make_cost_oracle(spec);
    const auto xs = generate_instances(spec, 2000, derive_seed(kSeed, "c4/instances"));
    Stream rng(kSeed, "c4", {std::uint64_t(spec.domain)});
    for (int i = 0; i < 10; ++i) {
      const Vector w = model.space().sample(rng);
      std::vector<double> grid;
      for (int k = 0; k < 5; ++k) grid.push_back(std::exp(std::log(0.01) * rng.uniform()));
      std::sort(grid.begin(), grid.end());
      const auto rep = check_bias_bound(model, w, xs, oracle, grid, 1e-3);
      if (!rep.exact) ++violations;
      for (const auto& c : rep.checks) {
        violations += !c.passed;
        fp << c;
      }
      non_monotone += !rep.v_monotone;
      pairs += grid.size();
    }
  }
  Outcome o;
  o.passed = pairs == 100 && violations == 0 && non_monotone == 0;
  o.detail = fmt("%.0f (w, lambda) pairs on contextual and Perm(2): %.0f violations, %.0f non-monotone V",
                 double(pairs), double(violations), double(non_monotone));
  o.fingerprint = fp.str();
  return o;
}

// ----------------------------------------------------------------------- 5

Outcome bias_scaling_slope() {
  const DomainSpec spec = contextual();
  const auto model = GeneralizedLinearModel::for_domain(spec, ParamSpace::box(2));
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t r = 0; r < 10; ++r) seeds.push_back(derive_seed(kSeed, "c5", {r}));
  const auto res = bias_scaling(model, (Vector(2) << 1.0, 0.0).finished(), domain_sampler(spec),
                                make_cost_oracle(spec), 100'000, seeds,
                                {0.04, 0.08, 0.16, 0.32, 0.64}, 1e-3, 0.5);
  Outcome o;
  o.passed = res.check.passed;
  o.detail = fmt("slope %.3f (CI %.3f..%.3f) against tau - 0.2 = 0.3", res.fit.fitted_slope,
                 res.fit.slope_ci_lo, res.fit.slope_ci_hi);
  o.fingerprint = (Print() << res.check << res.fit).str();
  return o;
}

// ----------------------------------------------------------------------- 6

Outcome empirical_process() {
  const auto t0 = std::chrono::steady_clock::now();
  const DomainSpec spec = contextual();
  const auto model = GeneralizedLinearModel::for_domain(spec, ParamSpace::box(2));
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t r = 0; r < 20; ++r) seeds.push_back(derive_seed(kSeed, "c6", {r}));
  EmpiricalProcessOptions eo;
  eo.pool_seed = derive_seed(kSeed, "c6/pool");
  const auto rep = check_empirical_process(model, parameter_grid(model.space(), 128),
                                           domain_sampler(spec), make_cost_oracle(spec),
                                           {64, 128, 256, 512, 1024, 2048, 4096}, 0.1, seeds, eo);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.passed = rep.bound.passed && rep.slope.passed && secs < 600.0;
  o.detail = fmt("slope %.3f (CI %.3f..%.3f); rhs covers %.1f%% of cells", rep.fit.fitted_slope,
                 rep.fit.slope_ci_lo, rep.fit.slope_ci_hi, 100.0 * (1.0 - rep.bound.lhs)) +
             fmt("; %.1f s", secs);
  Print fp;
  fp << rep.bound << rep.slope << rep.fit;
  for (const auto& c : rep.cells) fp << c.delta_hat << c.rhs;
  o.fingerprint = fp.str();
  return o;
}

// ----------------------------------------------------------------------- 7

Outcome lipschitz() {
  Print fp;
  bool passed = true;
  std::string detail;
  for (const DomainSpec& spec : {contextual(), scheduling(3)}) {
    const auto model = GeneralizedLinearModel::for_domain(spec, ParamSpace::box(spec.feature_dimension()));
    const auto xs = generate_instances(spec, 200, derive_seed(kSeed, "c7/instances"));
    LipschitzOptions lo;
    lo.seed = derive_seed(kSeed, "c7", {std::uint64_t(spec.domain)});
    const auto rep = check_lipschitz_lemmas(model, xs, 0.1, 1000, lo);
    for (const auto& c : rep.checks) {
      passed = passed && c.passed;
      fp << c;
    }
    detail += std::string(detail.empty() ? "" : "; ") + domain_name(spec.domain) +
              fmt(" theta %.3f, w %.3f, halving %.2f", rep.checks[0].lhs, rep.checks[1].lhs,
                  rep.checks[2].lhs);
  }
  Outcome o;
  o.passed = passed;
  o.detail = detail + " (slope / bound, 1000 probes each)";
  o.fingerprint = fp.str();
  return o;
}

// ----------------------------------------------------------------------- 8

Outcome ksos_correctness() {
  h::SweepConfig sc;
  sc.M_grid = {32, 64, 128, 256};
  sc.ksos_dims = {1, 2};
  sc.ksos_cbar = {1.0, 0.3};
  sc.seeds = 10;
  const auto study = h::planted_ksos_study(sc, derive_seed(kSeed, "c8"), 0.1);

  std::size_t uncertified = 0, rises = 0;
  for (const auto& r : study.runs) uncertified += !r.certified;
  bool accurate = true;
  std::string acc;
  for (std::size_t i = 0; i < study.summary.size(); ++i) {
    const auto& s = study.summary[i];
    if (i > 0 && study.summary[i - 1].dim == s.dim &&
        !(s.median_arg_error < study.summary[i - 1].median_arg_error)) {
      ++rises;
    }
    const bool target = (s.dim == 1 && s.M == 64) || (s.dim == 2 && s.M == 256);
    if (!target) continue;
    const double tol = s.dim == 1 ? 1e-2 : 3e-2;
    accurate = accurate && s.median_arg_error <= tol && s.median_value_error <= 1e-3;
    acc += fmt("%.0f-d M=%.0f: arg %.1e, value %.1e; ", s.dim, double(s.M), s.median_arg_error,
               s.median_value_error);
  }

  double worst_trace = 0.0;
  for (int d : {1, 2}) {
    KsosConfig kc;
    kc.M = 64;
    kc.seed = derive_seed(kSeed, "c8/constant", {std::uint64_t(d)});
    kc.lambda_phi = lambda_phi_schedule(64, d, kc.smoothness(d), 0.1, d == 1 ? 1.0 : 0.3);
    const auto r = ksos_minimize([](const Vector&) { return 0.7; }, ParamSpace::box(d), kc);
    worst_trace = std::max(worst_trace, r.trace_term);
  }

  Outcome o;
  o.passed = accurate && rises == 0 && uncertified == 0 && worst_trace <= 1e-8;
  o.detail = acc + fmt("%.0f non-decreasing doublings, %.0f uncertified runs, constant trace %.1e",
                       double(rises), double(uncertified), worst_trace);
  Print fp;
  for (const auto& r : study.runs) fp << r.arg_error << r.value_error << r.certificate << r.c_hat;
  fp << worst_trace;
  o.fingerprint = fp.str();
  return o;
}

// ----------------------------------------------------------------------- 9

Outcome uw_property() {
  const DomainSpec ctx = contextual();
  const auto model = GeneralizedLinearModel::for_domain(ctx, ParamSpace::box(2));
  const auto xs = generate_instances(ctx, 100'000, derive_seed(kSeed, "c9"));
  const UwEstimate e = uw_moment(model, (Vector(2) << 1.0, 0.0).finished(), xs, 0.5, 0.0, 1);
  const bool closed = std::abs(e.value - 2.0) <= 3.0 * e.std_error;

  Print fp;
  fp << e.value << e.std_error;
  std::size_t exceed = 0, evaluated = 0;
  for (const DomainSpec& spec : {contextual(), scheduling(3)}) {
    const auto m = GeneralizedLinearModel::for_domain(spec, ParamSpace::box(spec.feature_dimension()));
    const auto ys = generate_instances(spec, 500, derive_seed(kSeed, "c9/bound"));
    Stream rng(kSeed, "c9/w", {std::uint64_t(spec.domain)});
    for (double eps : {1e-3, 1e-2, 1e-1}) {
      for (int i = 0; i < 10; ++i) {
        const UwEstimate b = uw_moment(m, m.space().sample(rng), ys, 0.5, eps, 16,
                                       derive_seed(kSeed, "c9/draws", {std::uint64_t(i)}));
        exceed += !(b.value <= *b.analytic_bound);
        ++evaluated;
        fp << b.value << *b.analytic_bound;
      }
    }
  }
  Outcome o;
  o.passed = closed && exceed == 0;
  o.detail = fmt("E (rho/sqrt d)^-1/2 = %.4f +- %.4f (closed form 2); ", e.value, e.std_error) +
             fmt("%.0f of %.0f estimates above the analytic bound", double(exceed), double(evaluated));
  o.fingerprint = fp.str();
  return o;
}

// ---------------------------------------------------------------------- 10

fs::path scratch_dir(const std::string& tag) {
  return fs::temp_directory_path() / ("perturbopt_acceptance_" + std::to_string(::getpid()) + "_" + tag);
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const h::ExperimentConfig base =
      h::load_config(std::string(PERTURBOPT_CONFIG_DIR) + "/scheduling_train.yaml");
  std::size_t not_worse = 0, better = 0;
  Print fp;
  const fs::path root = scratch_dir("train");
  for (std::uint64_t r = 0; r < 20; ++r) {
    h::ExperimentConfig cfg = base;
    cfg.master_seed = derive_seed(kSeed, "c10", {r});
    cfg.perturbation.master_seed = cfg.master_seed;
    h::RunOptions opts;
    opts.out = root / std::to_string(r);
    h::run_generate(cfg, opts);
    const auto res = h::run_train(cfg, opts);
    not_worse += !res.solver_failed && res.test_risk <= res.random_median_test_risk;
    better += !res.solver_failed && res.test_risk < res.random_median_test_risk;
    const auto manifest = nlohmann::json::parse(std::ifstream(opts.out / "manifest.json"));
    for (const auto& [name, digest] : manifest["files"].items()) {
      fp << name << digest.get<std::string>();
    }
  }
  fs::remove_all(root);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.passed = not_worse == 20 && better >= 18 && secs < 300.0;
  o.detail = fmt("learned policy beats the random-policy median in %.0f/20 seeds (%.0f/20 not worse); %.1f s",
                 double(better), double(not_worse), secs);
  o.fingerprint = fp.str();
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* title;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"normal-cone geometry", geometry},
      {"closed-form p_lambda", p_lambda_closed_form},
      {"perturbation bias bounds", bias_bounds},
      {"perturbation bias scaling", bias_scaling_slope},
      {"empirical process", empirical_process},
      {"Lipschitz smoothing", lipschitz},
      {"kSoS correctness", ksos_correctness},
      {"UW moments", uw_property},
      {"end-to-end scheduling", end_to_end},
  };

  bool all = true;
  std::vector<std::string> fingerprints;
  set_thread_count(1);
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", i + 1,
                criteria[i].title, o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.passed;
    fingerprints.push_back(h::sha256_hex(o.fingerprint));
  }

  std::vector<std::string> mismatched;
  for (unsigned threads : {4u, 8u}) {
    set_thread_count(threads);
    for (std::size_t i = 0; i < criteria.size(); ++i) {
      std::string fp;
      try {
        fp = h::sha256_hex(criteria[i].run().fingerprint);
      } catch (const std::exception&) {
      }
      if (fp != fingerprints[i]) {
        mismatched.push_back(std::to_string(i + 1) + "@" + std::to_string(threads));
      }
    }
  }
  std::string list;
  for (const auto& m : mismatched) list += (list.empty() ? "" : ", ") + m;
  const bool repro = mismatched.empty();
  std::printf("%s criterion 11 (reproducibility): criteria 1-10 at 4 and 8 threads %s\n",
              repro ? "PASS" : "FAIL",
              repro ? "match the single-thread outputs bit for bit"
                    : ("differ from one thread: " + list).c_str());
  all = all && repro;
  return all ? 0 : 1;
}
