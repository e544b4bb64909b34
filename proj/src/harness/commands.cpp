#include "perturbopt/harness/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>

#include <nlohmann/json.hpp>

#include "perturbopt/harness/io.hpp"
#include "perturbopt/ksos.hpp"
#include "perturbopt/oracle.hpp"
#include "perturbopt/parallel.hpp"

namespace perturbopt::harness {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void note(const RunOptions& o, const std::string& msg) {
  if (o.verbose) std::cerr << "[perturbopt] " << msg << '\n';
}

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string flag(bool b) { return b ? "true" : "false"; }

std::string vec_text(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ";" : "") + num(v[i]);
  return out;
}

fs::path output_path(const ExperimentConfig& cfg, const RunOptions& opts) {
  return opts.out.empty() ? resolve_output_dir(cfg, std::nullopt) : opts.out;
}

OutputDir open_output(const fs::path& root) {
  try {
    return OutputDir(root);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

Manifest base_manifest(const std::string& command, const ExperimentConfig& cfg,
                       const RunOptions& opts) {
  Manifest m;
  m.command = command;
  m.config_yaml = to_yaml(cfg);
  m.seeds["master"] = cfg.master_seed;
  m.threads = opts.threads ? opts.threads : thread_count();
  return m;
}

ParamSpace config_space(const ExperimentConfig& cfg) {
  return ParamSpace::box(cfg.domain.feature_dimension(), cfg.box_lo, cfg.box_hi);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// A failing check first, otherwise the smallest margin, renamed.
BoundCheck worst_of(const std::string& name, const std::vector<BoundCheck>& checks) {
  if (checks.empty()) throw InvalidArgument("no checks to summarize");
  const BoundCheck* pick = &checks.front();
  for (const auto& c : checks) {
    if (pick->passed && !c.passed) pick = &c;
    else if (pick->passed == c.passed && c.margin < pick->margin) pick = &c;
  }
  BoundCheck out = *pick;
  out.name = name;
  std::size_t failures = 0;
  for (const auto& c : checks) failures += !c.passed;
  out.params["evaluated"] = double(checks.size());
  out.params["failures"] = double(failures);
  return out;
}

CsvTable check_table(const std::vector<BoundCheck>& checks) {
  CsvTable t({"name", "lhs", "rhs", "margin", "lhs_std_error", "passed", "params"});
  for (const auto& c : checks) {
    std::string params;
    for (const auto& [k, v] : c.params) params += (params.empty() ? "" : ";") + k + "=" + num(v);
    t.add({{"name", c.name},
           {"lhs", num(c.lhs)},
           {"rhs", num(c.rhs)},
           {"margin", num(c.margin)},
           {"lhs_std_error", num(c.lhs_std_error)},
           {"passed", flag(c.passed)},
           {"params", params}});
  }
  return t;
}

Vector config_point(const std::vector<double>& w, int d, const std::string& key) {
  if (int(w.size()) != d) {
    throw ConfigError(key + ": parameter has " + std::to_string(w.size()) +
                      " entries, the model has " + std::to_string(d));
  }
  return Eigen::Map<const Vector>(w.data(), d);
}

Dag random_dag(Stream& rng) {
  Dag g;
  g.n_nodes = 4 + int(rng.index(4));
  g.source = 0;
  g.sink = g.n_nodes - 1;
  std::set<std::pair<int, int>> arcs;
  for (int i = 0; i + 1 < g.n_nodes; ++i) arcs.insert({i, i + 1});
  const std::size_t extra = rng.index(10 - arcs.size() + 1);
  for (std::size_t t = 0; t < 4 * extra && arcs.size() < g.n_nodes - 1 + extra; ++t) {
    const int i = int(rng.index(std::size_t(g.n_nodes - 2)));
    const int j = i + 2 + int(rng.index(std::size_t(g.n_nodes - i - 2)));
    arcs.insert({i, j});
  }
  g.arcs.assign(arcs.begin(), arcs.end());
  return g;
}

}  // namespace

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<fs::path>& cli_out) {
  if (cli_out) return *cli_out;
  fs::path p = cfg.output_dir.empty() ? fs::path("runs") / cfg.name : fs::path(cfg.output_dir);
  if (p.is_relative()) {
    const char* env = std::getenv("PERTURBOPT_OUT");
    if (env && *env) p = fs::path(env) / p;
  }
  return p;
}

// ------------------------------------------------------------------ generate

GenerateResult run_generate(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (cfg.n_train == 0 || cfg.n_test == 0) throw ConfigError("n_train and n_test must be positive");
  const auto t0 = Clock::now();
  OutputDir out = open_output(output_path(cfg, opts));
  const std::uint64_t train_seed = derive_seed(cfg.master_seed, "instances/train");
  const std::uint64_t test_seed = derive_seed(cfg.master_seed, "instances/test");
  note(opts, "generating " + num(cfg.n_train) + " + " + num(cfg.n_test) + " " +
                 domain_name(cfg.domain.domain) + " instances");
  const auto train = generate_instances(cfg.domain, cfg.n_train, train_seed);
  const auto test = generate_instances(cfg.domain, cfg.n_test, test_seed);
  out.write_text("instances_train.jsonl", instances_to_jsonl(train));
  out.write_text("instances_test.jsonl", instances_to_jsonl(test));
  out.write_text("config.yaml", to_yaml(cfg));

  Manifest m = base_manifest("generate", cfg, opts);
  m.seeds["instances/train"] = train_seed;
  m.seeds["instances/test"] = test_seed;
  m.timings_s["total"] = seconds_since(t0);
  write_manifest(out, m);
  return {train.size(), test.size()};
}

// --------------------------------------------------------------------- train

TrainResult run_train(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto t0 = Clock::now();
  const fs::path root = output_path(cfg, opts);
  const fs::path train_file = root / "instances_train.jsonl";
  const fs::path test_file = root / "instances_test.jsonl";
  if (!fs::exists(train_file) || !fs::exists(test_file)) {
    throw ConfigError("no dataset in " + root.string() + "; run generate first");
  }
  auto train = instances_from_jsonl(train_file);
  auto test = instances_from_jsonl(test_file);
  if (train.empty() || test.empty()) throw ConfigError("dataset in " + root.string() + " is empty");
  OutputDir out = open_output(root);

  const ParamSpace space = config_space(cfg);
  const int d = space.dim();
  const auto model = GeneralizedLinearModel::for_domain(cfg.domain, space);
  model.verify(train);
  model.verify(test);
  const CostOracle oracle = make_cost_oracle(cfg.domain);

  Manifest m = base_manifest("train", cfg, opts);
  PerturbationSpec train_spec = cfg.perturbation;
  train_spec.master_seed = derive_seed(cfg.master_seed, "perturb/train");
  PerturbationSpec test_spec = cfg.perturbation;
  test_spec.master_seed = derive_seed(cfg.master_seed, "perturb/test");
  m.seeds["perturb/train"] = train_spec.master_seed;
  m.seeds["perturb/test"] = test_spec.master_seed;
  auto t_phase = Clock::now();
  const RiskSurface train_surface(model, train, oracle, train_spec);
  const RiskSurface test_surface(model, test, oracle, test_spec);
  m.timings_s["setup"] = seconds_since(t_phase);
  const Surface f = [&](const Vector& w) { return train_surface(w); };

  const OptimizerConfig& oc = cfg.optimizer;
  KsosConfig kc;
  kc.M = oc.M;
  kc.s = oc.s;
  kc.seed = derive_seed(cfg.master_seed, "ksos");
  const double s = kc.smoothness(d);
  kc.lambda_phi = oc.lambda_phi ? *oc.lambda_phi : lambda_phi_schedule(oc.M, d, s, oc.delta, oc.cbar);
  m.seeds["ksos"] = kc.seed;

  const bool use_ksos = oc.method == "ksos";
  const std::size_t budget =
      oc.baseline_budget ? oc.baseline_budget : (use_ksos ? oc.M + 2 : oc.M);
  const std::uint64_t baseline_seed = derive_seed(cfg.master_seed, "baseline");
  m.seeds["baseline"] = baseline_seed;

  TrainResult result;
  CsvTable reports({"policy", "split", "value", "mc_std_error", "n_instances", "K", "lambda",
                    "epsilon0", "mode", "w"});
  const auto report_row = [&](const std::string& policy, const std::string& split,
                              const RiskReport& r, const Vector& w) {
    reports.add({{"policy", policy},
                 {"split", split},
                 {"value", num(r.value)},
                 {"mc_std_error", num(r.mc_std_error)},
                 {"n_instances", num(r.n_instances)},
                 {"K", num(r.K)},
                 {"lambda", num(r.lambda)},
                 {"epsilon0", num(r.epsilon0)},
                 {"mode", risk_mode_name(r.mode)},
                 {"w", vec_text(w)}});
  };

  nlohmann::json summary;
  summary["method"] = oc.method;
  summary["lambda_phi"] = kc.lambda_phi;
  summary["s"] = s;

  t_phase = Clock::now();
  std::optional<KsosResult> ks;
  if (use_ksos) {
    note(opts, "kSoS with M = " + num(oc.M) + ", lambda_phi = " + num(kc.lambda_phi));
    try {
      ks = ksos_minimize(f, space, kc);
      result.w = ks->w_hat;
      result.converged = ks->converged;
    } catch (const SolverError& e) {
      result.solver_failed = true;
      result.failure = e.what();
      note(opts, std::string("solver failed: ") + e.what());
    }
  } else {
    const auto b = baseline_minimize(f, space, parse_baseline(oc.method), budget, kc.seed);
    result.w = b.w;
  }
  m.timings_s["optimize"] = seconds_since(t_phase);
  t_phase = Clock::now();

  const auto base =
      baseline_minimize(f, space, parse_baseline(oc.baseline), budget, baseline_seed);
  const RiskReport base_test = test_surface.evaluate(base.w);
  result.baseline_test_risk = base_test.value;
  report_row("baseline", "train", train_surface.evaluate(base.w), base.w);
  report_row("baseline", "test", base_test, base.w);

  if (!result.solver_failed) {
    const RiskReport tr = train_surface.evaluate(result.w);
    const RiskReport te = test_surface.evaluate(result.w);
    result.train_risk = tr.value;
    result.test_risk = te.value;
    report_row(oc.method, "train", tr, result.w);
    report_row(oc.method, "test", te, result.w);
  }

  std::vector<double> random_risks;
  for (std::size_t i = 0; i < oc.random_policies; ++i) {
    Stream rng(cfg.master_seed, "random_policy", {i});
    const Vector w = space.sample(rng);
    const RiskReport r = test_surface.evaluate(w);
    random_risks.push_back(r.value);
    report_row("random_" + num(i), "test", r, w);
  }
  result.random_median_test_risk = median_of(random_risks);
  out.write_csv("risk_reports.csv", reports);
  m.timings_s["evaluate"] = seconds_since(t_phase);
  t_phase = Clock::now();

  if (ks) {
    out.write_json("ksos_result.json", to_json(*ks));
    nlohmann::json cert{{"lambda_phi", kc.lambda_phi}, {"gap", ks->aposteriori_gap},
                        {"trace_term", ks->trace_term}};
    if (train_spec.lambda > 0.0) {
      double f_sup = 0.0;
      for (int size : cfg.domain.sizes) {
        const CostBounds b = declared_bounds(cfg.domain, size);
        f_sup = std::max({f_sup, std::abs(b.lower), std::abs(b.upper)});
      }
      const SmoothnessBounds sb =
          glm_smoothness_estimates(model, train, train_spec.lambda, s, f_sup);
      result.certificate = certificate(*ks, sb.trace, sb.sobolev, kc.lambda_phi);
      cert["certificate"] = result.certificate;
      cert["trace_bound"] = sb.trace;
      cert["sobolev_bound"] = sb.sobolev;
      cert["f_sup"] = f_sup;
      cert["smoothness_fallback"] = sb.fallback;
    } else {
      result.certificate = std::nan("");
      cert["certificate"] = nullptr;
      cert["note"] = "lambda = 0: the risk is not smooth in w";
    }
    out.write_json("certificate.json", cert);
  }

  m.timings_s["certificate"] = seconds_since(t_phase);
  summary["w"] = std::vector<double>(result.w.data(), result.w.data() + result.w.size());
  summary["train_risk"] = result.train_risk;
  summary["test_risk"] = result.test_risk;
  summary["baseline"] = oc.baseline;
  summary["baseline_budget"] = budget;
  summary["baseline_test_risk"] = result.baseline_test_risk;
  summary["random_median_test_risk"] = result.random_median_test_risk;
  summary["converged"] = result.converged;
  summary["solver_failed"] = result.solver_failed;
  if (result.solver_failed) summary["failure"] = result.failure;
  if (ks && std::isfinite(result.certificate)) summary["certificate"] = result.certificate;
  out.write_json("train_summary.json", summary);

  m.timings_s["total"] = seconds_since(t0);
  if (result.solver_failed) m.notes["failure"] = result.failure;
  write_manifest(out, m);
  return result;
}

// --------------------------------------------------------------------- sweep

SweepKind parse_sweep_kind(const std::string& name) {
  if (name == "bias") return SweepKind::Bias;
  if (name == "nprocess") return SweepKind::NProcess;
  if (name == "ksos") return SweepKind::Ksos;
  throw ConfigError("unknown sweep '" + name + "' (expected bias, nprocess or ksos)");
}

const char* sweep_kind_name(SweepKind k) {
  switch (k) {
    case SweepKind::Bias: return "bias";
    case SweepKind::NProcess: return "nprocess";
    case SweepKind::Ksos: return "ksos";
  }
  return "?";
}

namespace {

void sweep_bias(const ExperimentConfig& cfg, const RunOptions& opts, OutputDir& out,
                Manifest& m, SweepResult& res) {
  const SweepConfig& sc = cfg.sweep;
  const ParamSpace space = config_space(cfg);
  const auto model = GeneralizedLinearModel::for_domain(cfg.domain, space);
  const CostOracle oracle = make_cost_oracle(cfg.domain);
  const InstanceSampler sampler = domain_sampler(cfg.domain);

  std::vector<Vector> ws;
  for (const auto& w : sc.w) ws.push_back(config_point(w, space.dim(), "sweep.w"));
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < sc.seeds; ++r) seeds.push_back(derive_seed(cfg.master_seed, "sweep/bias", {r}));
  m.seeds["sweep/bias"] = derive_seed(cfg.master_seed, "sweep/bias");

  const std::size_t R = seeds.size();
  std::vector<BiasReport> reports(ws.size() * R);
  note(opts, "bias sweep: " + num(reports.size()) + " replicates of " + num(sc.n_instances));
  parallel_for(reports.size(), [&](std::size_t c) {
    const std::size_t wi = c / R, r = c % R;
    const auto xs = sampler(sc.n_instances, seeds[r]);
    reports[c] = check_bias_bound(model, ws[wi], xs, oracle, sc.lambda_grid,
                                  cfg.perturbation.epsilon0,
                                  {cfg.perturbation.mc_samples, seeds[r]});
  });

  CsvTable t({"row_type", "w", "seed", "lambda", "V", "lhs", "lhs_eps0", "rhs2osc", "rhs4osc",
              "std_error", "passed", "slope", "slope_ci_lo", "slope_ci_hi", "tau"});
  for (std::size_t wi = 0; wi < ws.size(); ++wi) {
    const std::map<std::string, double> wp{{"w_index", double(wi)}};
    std::vector<BoundCheck> b2, b4;
    std::size_t non_monotone = 0;
    std::vector<std::vector<double>> y;
    for (std::size_t r = 0; r < R; ++r) {
      const BiasReport& rep = reports[wi * R + r];
      for (const auto& c : rep.checks) (c.name == "bias/2osc" ? b2 : b4).push_back(c);
      non_monotone += !rep.v_monotone;
      std::vector<double> row;
      for (const auto& br : rep.rows) {
        row.push_back(br.lhs_eps0);
        t.add({{"row_type", "cell"},
               {"w", vec_text(ws[wi])},
               {"seed", num(r)},
               {"lambda", num(br.lambda)},
               {"V", num(br.V)},
               {"lhs", num(br.lhs)},
               {"lhs_eps0", num(br.lhs_eps0)},
               {"rhs2osc", num(br.rhs2osc)},
               {"rhs4osc", num(br.rhs4osc)},
               {"std_error", num(br.std_error)},
               {"passed", flag(br.passed)}});
      }
      y.push_back(std::move(row));
    }
    res.checks.push_back(worst_of("bias/2osc", b2));
    res.checks.push_back(worst_of("bias/4osc", b4));
    res.checks.push_back(BoundCheck::make("bias/V_monotone", double(non_monotone), 0.0, 0.0, wp));
    try {
      const ScalingFit fit = fit_scaling(sc.lambda_grid, y);
      const BoundCheck slope = BoundCheck::make("bias/scaling_slope", sc.tau - 0.2,
                                                fit.fitted_slope, 0.0,
                                                {{"w_index", double(wi)}, {"tau", sc.tau}});
      res.checks.push_back(slope);
      res.fits.push_back(fit);
      t.add({{"row_type", "fit"},
             {"w", vec_text(ws[wi])},
             {"passed", flag(slope.passed)},
             {"slope", num(fit.fitted_slope)},
             {"slope_ci_lo", num(fit.slope_ci_lo)},
             {"slope_ci_hi", num(fit.slope_ci_hi)},
             {"tau", num(sc.tau)}});
    } catch (const InvalidArgument& e) {
      m.notes["fit"] = std::string("no scaling fit: ") + e.what();
    }
  }
  out.write_csv("bias.csv", t);
}

void sweep_nprocess(const ExperimentConfig& cfg, const RunOptions& opts, OutputDir& out,
                    Manifest& m, SweepResult& res) {
  const SweepConfig& sc = cfg.sweep;
  const ParamSpace space = config_space(cfg);
  const auto model = GeneralizedLinearModel::for_domain(cfg.domain, space);
  const CostOracle oracle = make_cost_oracle(cfg.domain);
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < sc.seeds; ++r) {
    seeds.push_back(derive_seed(cfg.master_seed, "sweep/nprocess", {r}));
  }
  EmpiricalProcessOptions eo;
  eo.pool_size = sc.pool_size;
  eo.dudley_constant = sc.dudley_constant;
  eo.delta = sc.delta;
  eo.mc_samples = cfg.perturbation.mc_samples;
  eo.pool_seed = derive_seed(cfg.master_seed, "sweep/nprocess/pool");
  m.seeds["sweep/nprocess/pool"] = eo.pool_seed;
  m.seeds["sweep/nprocess"] = derive_seed(cfg.master_seed, "sweep/nprocess");

  const auto grid = parameter_grid(space, sc.w_grid_points);
  note(opts, "empirical process sweep over " + num(grid.size()) + " parameters");
  const auto rep = check_empirical_process(model, grid, domain_sampler(cfg.domain), oracle,
                                           sc.n_grid, sc.nprocess_lambda, seeds, eo);

  CsvTable t({"row_type", "seed", "n", "delta_hat", "rhs", "passed", "slope", "slope_ci_lo",
              "slope_ci_hi", "coverage", "osc", "dudley", "pool_std_error"});
  std::map<std::uint64_t, std::size_t> seed_index;
  for (std::size_t r = 0; r < seeds.size(); ++r) seed_index[seeds[r]] = r;
  std::size_t covered = 0;
  for (const auto& c : rep.cells) {
    covered += c.passed;
    t.add({{"row_type", "cell"},
           {"seed", num(seed_index.at(c.seed))},
           {"n", num(c.n)},
           {"delta_hat", num(c.delta_hat)},
           {"rhs", num(c.rhs)},
           {"passed", flag(c.passed)}});
  }
  t.add({{"row_type", "summary"},
         {"passed", flag(rep.bound.passed && rep.slope.passed)},
         {"slope", num(rep.fit.fitted_slope)},
         {"slope_ci_lo", num(rep.fit.slope_ci_lo)},
         {"slope_ci_hi", num(rep.fit.slope_ci_hi)},
         {"coverage", num(rep.cells.empty() ? 0.0 : double(covered) / double(rep.cells.size()))},
         {"osc", num(rep.osc)},
         {"dudley", num(rep.dudley)},
         {"pool_std_error", num(rep.pool_std_error)}});
  res.checks.push_back(rep.bound);
  res.checks.push_back(rep.slope);
  res.fits.push_back(rep.fit);
  out.write_csv("nprocess.csv", t);
}

void sweep_ksos(const ExperimentConfig& cfg, const RunOptions& opts, OutputDir& out, Manifest& m,
                SweepResult& res) {
  const SweepConfig& sc = cfg.sweep;
  note(opts, "kSoS sweep: " + num(sc.ksos_dims.size() * sc.M_grid.size() * sc.seeds) + " runs");
  m.seeds["sweep/ksos"] = derive_seed(cfg.master_seed, "sweep/ksos");
  const PlantedKsosStudy study = planted_ksos_study(sc, cfg.master_seed, cfg.optimizer.delta);

  CsvTable t({"row_type", "dim", "M", "seed", "lambda_phi", "arg_error", "value_error", "c_hat",
              "gap", "certificate", "grid_error", "certified", "converged",
              "median_arg_error", "median_value_error", "median_abs_c_hat"});
  for (const auto& c : study.runs) {
    t.add({{"row_type", "run"},
           {"dim", num(std::size_t(c.dim))},
           {"M", num(c.M)},
           {"seed", num(c.seed)},
           {"lambda_phi", num(c.lambda_phi)},
           {"arg_error", num(c.arg_error)},
           {"value_error", num(c.value_error)},
           {"c_hat", num(c.c_hat)},
           {"gap", num(c.gap)},
           {"certificate", num(c.certificate)},
           {"grid_error", num(c.grid_error)},
           {"certified", flag(c.certified)},
           {"converged", flag(c.converged)}});
  }
  for (const auto& sm : study.summary) {
    t.add({{"row_type", "summary"},
           {"dim", num(std::size_t(sm.dim))},
           {"M", num(sm.M)},
           {"median_arg_error", num(sm.median_arg_error)},
           {"median_value_error", num(sm.median_value_error)},
           {"median_abs_c_hat", num(sm.median_abs_c_hat)}});
  }
  for (int d : sc.ksos_dims) {
    std::size_t uncertified = 0, rises = 0;
    for (const auto& c : study.runs) uncertified += c.dim == d && !c.certified;
    const PlantedSummary* prev = nullptr;
    for (const auto& sm : study.summary) {
      if (sm.dim != d) continue;
      if (prev && !(sm.median_arg_error < prev->median_arg_error)) ++rises;
      prev = &sm;
    }
    res.checks.push_back(BoundCheck::make("ksos/certificate", double(uncertified), 0.0, 0.0,
                                          {{"dim", double(d)}}));
    res.checks.push_back(BoundCheck::make("ksos/error_decrease", double(rises), 0.0, 0.0,
                                          {{"dim", double(d)}}));
  }
  out.write_csv("ksos.csv", t);
}

}  // namespace

Vector planted_point(int d) {
  if (d < 1 || d > 4) throw InvalidArgument("planted quadratics are defined for d = 1..4");
  if (d == 1) return Vector::Constant(1, 0.3);
  const double table[] = {0.2, -0.5, 0.35, -0.1};
  return Eigen::Map<const Vector>(table, d);
}

PlantedKsosStudy planted_ksos_study(const SweepConfig& sc, std::uint64_t master_seed,
                                    double delta) {
  struct DimSetup {
    int d = 0;
    double cbar = 0.0, s = 0.0, grid_min = 0.0;
    Vector a;
    PlantedQuadraticBounds bounds;
  };
  if (sc.ksos_cbar.size() != sc.ksos_dims.size()) {
    throw InvalidArgument("one cbar per kSoS dimension is required");
  }
  std::vector<DimSetup> dims;
  for (std::size_t k = 0; k < sc.ksos_dims.size(); ++k) {
    DimSetup ds;
    ds.d = sc.ksos_dims[k];
    ds.cbar = sc.ksos_cbar[k];
    ds.s = KsosConfig{}.smoothness(ds.d);
    ds.a = planted_point(ds.d);
    const ParamSpace W = ParamSpace::box(ds.d);
    ds.bounds = planted_quadratic_bounds(ds.a, W, ds.s, W.diameter() / 4.0);
    ds.grid_min = std::numeric_limits<double>::infinity();
    for (const auto& w : parameter_grid(W, 10'000)) {
      ds.grid_min = std::min(ds.grid_min, (w - ds.a).squaredNorm());
    }
    dims.push_back(ds);
  }

  PlantedKsosStudy study;
  std::vector<std::size_t> dim_of;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    for (std::size_t M : sc.M_grid) {
      for (std::size_t r = 0; r < sc.seeds; ++r) {
        PlantedRun run;
        run.dim = dims[k].d;
        run.M = M;
        run.seed = r;
        study.runs.push_back(run);
        dim_of.push_back(k);
      }
    }
  }
  parallel_for(study.runs.size(), [&](std::size_t i) {
    PlantedRun& c = study.runs[i];
    const DimSetup& ds = dims[dim_of[i]];
    const ParamSpace W = ParamSpace::box(ds.d);
    KsosConfig kc;
    kc.M = c.M;
    kc.seed = derive_seed(master_seed, "sweep/ksos", {std::uint64_t(ds.d), c.seed});
    kc.lambda_phi = lambda_phi_schedule(c.M, ds.d, ds.s, delta, ds.cbar);
    const Vector a = ds.a;
    const auto r = ksos_minimize([a](const Vector& w) { return (w - a).squaredNorm(); }, W, kc);
    c.lambda_phi = kc.lambda_phi;
    c.arg_error = (r.w_hat - a).norm();
    c.value_error = r.value_at_w_hat;
    c.c_hat = r.c_hat;
    c.gap = r.aposteriori_gap;
    c.certificate = certificate(r, ds.bounds.trace, ds.bounds.sobolev, kc.lambda_phi);
    c.grid_error = r.value_at_w_hat - ds.grid_min;
    c.certified = c.certificate >= c.grid_error;
    c.converged = r.converged;
  });

  for (std::size_t k = 0; k < dims.size(); ++k) {
    for (std::size_t M : sc.M_grid) {
      std::vector<double> arg, val, ch;
      for (std::size_t i = 0; i < study.runs.size(); ++i) {
        const PlantedRun& c = study.runs[i];
        if (dim_of[i] != k || c.M != M) continue;
        arg.push_back(c.arg_error);
        val.push_back(c.value_error);
        ch.push_back(std::abs(c.c_hat));
      }
      study.summary.push_back({dims[k].d, M, median_of(arg), median_of(val), median_of(ch)});
    }
  }
  return study;
}

SweepResult run_sweep(SweepKind kind, const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto t0 = Clock::now();
  OutputDir out = open_output(output_path(cfg, opts));
  Manifest m = base_manifest(std::string("sweep ") + sweep_kind_name(kind), cfg, opts);
  SweepResult res;
  switch (kind) {
    case SweepKind::Bias: sweep_bias(cfg, opts, out, m, res); break;
    case SweepKind::NProcess: sweep_nprocess(cfg, opts, out, m, res); break;
    case SweepKind::Ksos: sweep_ksos(cfg, opts, out, m, res); break;
  }
  for (const auto& c : res.checks) res.passed = res.passed && c.passed;
  const std::string name = sweep_kind_name(kind);
  out.write_csv(name + "_checks.csv", check_table(res.checks));
  CsvTable fits({"fit", "x", "y_median", "fitted_slope", "slope_ci_lo", "slope_ci_hi"});
  for (std::size_t i = 0; i < res.fits.size(); ++i) {
    const ScalingFit& f = res.fits[i];
    for (std::size_t j = 0; j < f.x_grid.size(); ++j) {
      fits.add({{"fit", num(i)},
                {"x", num(f.x_grid[j])},
                {"y_median", num(f.y_values[j])},
                {"fitted_slope", num(f.fitted_slope)},
                {"slope_ci_lo", num(f.slope_ci_lo)},
                {"slope_ci_hi", num(f.slope_ci_hi)}});
    }
  }
  out.write_csv(name + "_fits.csv", fits);
  out.write_text("config.yaml", to_yaml(cfg));
  m.timings_s["total"] = seconds_since(t0);
  write_manifest(out, m);
  return res;
}

// --------------------------------------------------------------------- check

BoundCheck check_oracle_equivalence(std::size_t trials, std::uint64_t seed, bool corrupt) {
  std::vector<SolutionPolytope> perms;
  for (int n = 2; n <= 6; ++n) perms.push_back(SolutionPolytope::permutahedron(n));
  std::size_t mismatches = 0, ties = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Stream rng(seed, "check/oracle", {t});
    const SolutionPolytope poly =
        t % 2 == 0 ? perms[(t / 2) % perms.size()] : SolutionPolytope::dag_paths(random_dag(rng));
    Vector theta(poly.dimension());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = rng.gaussian();
    const EnumeratedArgmax brute = brute_force_oracle(poly, theta);
    if (brute.tie) {
      ++ties;
      continue;
    }
    const Vector y = linear_oracle(poly, corrupt ? Vector(-theta) : theta).y;
    if ((y - poly.vertex(brute.index)).lpNorm<Eigen::Infinity>() > 1e-9) ++mismatches;
  }
  return BoundCheck::make("oracle/brute_force", double(mismatches), 0.0, 0.0,
                          {{"trials", double(trials)}, {"ties_skipped", double(ties)}});
}

BoundCheck check_p_lambda_closed_form(std::size_t K, std::uint64_t seed) {
  const PolytopePtr poly = contextual_polytope();
  const Vector y = Vector::Ones(1);
  double worst = 0.0, worst_theta = 0.0, worst_lambda = 0.0;
  std::uint64_t key = 0;
  for (double theta : {-1.0, -0.3, 0.0, 0.3, 1.0}) {
    for (double lambda : {0.05, 0.1, 0.2, 0.5, 1.0}) {
      PerturbationSpec spec;
      spec.lambda = lambda;
      spec.epsilon0 = 0.0;
      spec.mc_samples = K;
      spec.master_seed = seed;
      const Estimate e = p_lambda(*poly, Vector::Constant(1, theta), y, spec, key++);
      const double exact = normal_cdf(theta / lambda);
      const double se = std::sqrt(exact * (1.0 - exact) / double(K));
      const double diff = std::abs(e.value - exact);
      const double z = diff == 0.0 ? 0.0 : diff / se;
      if (z > worst) {
        worst = z;
        worst_theta = theta;
        worst_lambda = lambda;
      }
    }
  }
  return BoundCheck::make("p_lambda/closed_form", worst, 3.0, 0.0,
                          {{"K", double(K)}, {"theta", worst_theta}, {"lambda", worst_lambda}});
}

CheckResult run_check(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto t0 = Clock::now();
  OutputDir out = open_output(output_path(cfg, opts));
  Manifest m = base_manifest("check", cfg, opts);
  CheckResult res;
  const std::uint64_t master = cfg.master_seed;
  const ParamSpace space = config_space(cfg);
  const auto model = GeneralizedLinearModel::for_domain(cfg.domain, space);
  const CostOracle oracle = make_cost_oracle(cfg.domain);
  const double lambda = cfg.perturbation.lambda;

  if (opts.inject_fault) m.notes["fault"] = "linear oracle corrupted";
  if (cfg.check.checks.empty()) res.warnings.push_back("0 checks configured");

  for (const auto& name : cfg.check.checks) {
    const auto tc = Clock::now();
    note(opts, "check " + name);
    try {
      if (name == "oracle") {
        res.checks.push_back(check_oracle_equivalence(cfg.check.trials,
                                                      derive_seed(master, "check/oracle"),
                                                      opts.inject_fault));
      } else if (name == "p_lambda") {
        res.checks.push_back(check_p_lambda_closed_form(8192, derive_seed(master, "check/p_lambda")));
      } else if (name == "lipschitz") {
        if (!(lambda > 0.0)) {
          res.warnings.push_back("lipschitz skipped: perturbation.lambda is 0");
          continue;
        }
        const auto xs = generate_instances(cfg.domain, 200, derive_seed(master, "check/lipschitz"));
        LipschitzOptions lo;
        lo.mc_samples = std::max<std::size_t>(cfg.perturbation.mc_samples, 4096);
        lo.seed = derive_seed(master, "check/lipschitz/probes");
        const auto rep = check_lipschitz_lemmas(model, xs, lambda,
                                                std::min<std::size_t>(cfg.check.trials, 200), lo);
        res.checks.insert(res.checks.end(), rep.checks.begin(), rep.checks.end());
      } else if (name == "gauss_tail") {
        std::vector<double> grid;
        for (int k = 1; k < 20; ++k) grid.push_back(k / 20.0);
        std::vector<BoundCheck> all;
        for (double rho : {0.0, 0.05, 0.3, 1.0})
          for (int d : {1, 3, 6})
            for (double q : {0.25, 0.5, 0.75}) all.push_back(check_gauss_tail(grid, rho, d, q));
        res.checks.push_back(worst_of("gauss_tail", all));
      } else if (name == "bias") {
        const auto xs = generate_instances(cfg.domain, 200, derive_seed(master, "check/bias"));
        std::vector<BoundCheck> b2, b4;
        std::size_t non_monotone = 0;
        for (std::uint64_t i = 0; i < 20; ++i) {
          Stream rng(master, "check/bias_w", {i});
          const auto rep = check_bias_bound(model, space.sample(rng), xs, oracle,
                                            cfg.sweep.lambda_grid, cfg.perturbation.epsilon0,
                                            {cfg.perturbation.mc_samples,
                                             derive_seed(master, "check/bias_mc", {i})});
          for (const auto& c : rep.checks) (c.name == "bias/2osc" ? b2 : b4).push_back(c);
          non_monotone += !rep.v_monotone;
        }
        res.checks.push_back(worst_of("bias/2osc", b2));
        res.checks.push_back(worst_of("bias/4osc", b4));
        res.checks.push_back(BoundCheck::make("bias/V_monotone", double(non_monotone), 0.0));
      } else if (name == "uw") {
        DomainSpec ctx;
        ctx.domain = Domain::Contextual;
        const auto ctx_model = GeneralizedLinearModel::for_domain(ctx, ParamSpace::box(2));
        const auto xs = generate_instances(ctx, 100'000, derive_seed(master, "check/uw"));
        const Vector w = (Vector(2) << 1.0, 0.0).finished();
        const UwEstimate e = uw_moment(ctx_model, w, xs, 0.5, 0.0, 1, derive_seed(master, "check/uw"));
        res.checks.push_back(BoundCheck::make("uw/closed_form", std::abs(e.value - 2.0), 0.0,
                                              e.std_error, {{"estimate", e.value}}));
        if (cfg.perturbation.epsilon0 > 0.0) {
          const auto ys = generate_instances(cfg.domain, 500, derive_seed(master, "check/uw_bound"));
          Stream rng(master, "check/uw_w");
          const UwEstimate b = uw_moment(model, space.sample(rng), ys, cfg.sweep.tau,
                                         cfg.perturbation.epsilon0, 16,
                                         derive_seed(master, "check/uw_bound"));
          res.checks.push_back(BoundCheck::make("uw/analytic_bound", b.value, *b.analytic_bound,
                                                b.std_error, {{"tau", cfg.sweep.tau}}));
        } else {
          res.warnings.push_back("uw/analytic_bound skipped: epsilon0 is 0");
        }
      }
    } catch (const Error& e) {
      BoundCheck c;
      c.name = name;
      c.lhs = c.rhs = c.margin = std::nan("");
      res.checks.push_back(c);
      res.warnings.push_back(name + ": " + e.what());
    }
    m.timings_s[name] = seconds_since(tc);
  }

  for (const auto& c : res.checks) {
    if (!c.passed) res.failed.push_back(c.name);
  }
  out.write_csv("check_report.csv", check_table(res.checks));
  out.write_text("config.yaml", to_yaml(cfg));
  for (std::size_t i = 0; i < res.warnings.size(); ++i) m.notes["warning_" + num(i)] = res.warnings[i];
  m.timings_s["total"] = seconds_since(t0);
  write_manifest(out, m);
  return res;
}

}  // namespace perturbopt::harness
