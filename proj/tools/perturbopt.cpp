// Command-line front end: generate, train, sweep and check.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "perturbopt/harness/commands.hpp"
#include "perturbopt/harness/io.hpp"
#include "perturbopt/parallel.hpp"

namespace po = perturbopt;
namespace h = perturbopt::harness;

namespace {

void print_check(const po::BoundCheck& c) {
  std::printf("%s %-24s lhs=%-14s rhs=%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
              h::format_number(c.lhs).c_str(), h::format_number(c.rhs).c_str());
}

int report_checks(const std::vector<po::BoundCheck>& checks) {
  std::string failed;
  for (const auto& c : checks) {
    print_check(c);
    if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
  }
  if (failed.empty()) return h::kExitOk;
  std::fprintf(stderr, "failed checks: %s\n", failed.c_str());
  return h::kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed decision-focused learning experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed_override;
  unsigned threads = 0;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "YAML experiment file (defaults when omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("-o,--out", out, "output directory");
  app.add_option("--seed-override", seed_override, "replace master_seed");
  app.add_option("-j,--threads", threads, "worker threads (0: hardware concurrency)");
  app.add_flag("-v,--verbose", verbose, "progress on stderr");

  auto* gen = app.add_subcommand("generate", "draw train and test instances");
  auto* train = app.add_subcommand("train", "fit w on the generated training set");
  auto* sweep = app.add_subcommand("sweep", "bound and scaling sweeps");
  std::string sweep_kind;
  sweep->add_option("kind", sweep_kind, "bias, nprocess or ksos")
      ->required()
      ->check(CLI::IsMember({"bias", "nprocess", "ksos"}));
  auto* check = app.add_subcommand("check", "invariant and bound checks");
  bool inject_fault = false;
  check->add_flag("--inject-fault", inject_fault, "corrupt the linear oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? h::kExitOk : h::kExitConfig;
  }

  try {
    h::ExperimentConfig cfg = config_path.empty() ? h::ExperimentConfig{}
                                                  : h::load_config(config_path);
    if (seed_override) {
      cfg.master_seed = *seed_override;
      cfg.perturbation.master_seed = *seed_override;
    }
    po::set_thread_count(threads);

    h::RunOptions opts;
    opts.out = h::resolve_output_dir(cfg, out ? std::optional<std::filesystem::path>(*out)
                                               : std::nullopt);
    opts.verbose = verbose;
    opts.inject_fault = inject_fault;
    opts.threads = po::thread_count();

    if (gen->parsed()) {
      const auto r = h::run_generate(cfg, opts);
      std::printf("generated %zu train and %zu test instances in %s\n", r.n_train, r.n_test,
                  opts.out.c_str());
      return h::kExitOk;
    }
    if (train->parsed()) {
      const auto r = h::run_train(cfg, opts);
      if (r.solver_failed) {
        std::fprintf(stderr, "solver failed: %s (partial results in %s)\n", r.failure.c_str(),
                     opts.out.c_str());
        return h::kExitSolver;
      }
      std::printf("train risk %s, test risk %s\n", h::format_number(r.train_risk).c_str(),
                  h::format_number(r.test_risk).c_str());
      std::printf("baseline test risk %s, random-policy median %s\n",
                  h::format_number(r.baseline_test_risk).c_str(),
                  h::format_number(r.random_median_test_risk).c_str());
      if (cfg.optimizer.method == "ksos") {
        std::printf("certificate %s%s\n", h::format_number(r.certificate).c_str(),
                    r.converged ? "" : " (solver did not converge)");
      }
      return h::kExitOk;
    }
    if (sweep->parsed()) {
      const auto r = h::run_sweep(h::parse_sweep_kind(sweep_kind), cfg, opts);
      return report_checks(r.checks);
    }
    const auto r = h::run_check(cfg, opts);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (r.checks.empty()) {
      std::printf("0 checks run\n");
      return h::kExitOk;
    }
    return report_checks(r.checks);
  } catch (const h::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return h::kExitConfig;
  } catch (const po::SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return h::kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return h::kExitCheckFailed;
  }
}
