#include "perturbopt/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "perturbopt/ksos.hpp"

namespace perturbopt::harness {
namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Mark& m, const std::string& path, const std::string& msg) const {
    const int line = m.line >= 0 ? m.line + 1 : 0;
    const int col = m.column >= 0 ? m.column + 1 : 0;
    std::ostringstream out;
    out << source_;
    if (line > 0) out << ':' << line << ':' << col;
    out << ": " << (path.empty() ? "" : path + ": ") << msg;
    throw ConfigError(out.str(), line, col);
  }

  void require_map(const YAML::Node& n, const std::string& path) const {
    if (!n.IsMap()) fail(n.Mark(), path, "expected a mapping");
  }

  void allow(const YAML::Node& map, const std::string& prefix,
             std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = map.begin(); it != map.end(); ++it) {
      const std::string k = it->first.as<std::string>();
      if (!ok.count(k)) fail(it->first.Mark(), join(prefix, k), "unknown key");
    }
  }

  template <class T>
  void get(const YAML::Node& map, const std::string& prefix, const char* key, T& out) {
    const YAML::Node n = map[key];
    if (!n) return;
    const std::string path = join(prefix, key);
    marks[path] = n.Mark();
    out = convert<T>(n, path);
  }

  std::map<std::string, YAML::Mark> marks;

 private:
  static std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
  }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n.Mark(), path, "expected a scalar");
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        const std::string text = n.Scalar();
        if (!text.empty() && text[0] == '-') fail(n.Mark(), path, "must be nonnegative");
        return n.as<T>();
      } else if constexpr (std::is_same_v<T, double>) {
        const double v = n.as<double>();
        if (!std::isfinite(v)) fail(n.Mark(), path, "must be finite");
        return v;
      } else {
        return n.as<T>();
      }
    } catch (const YAML::BadConversion&) {
      fail(n.Mark(), path, "cannot read '" + n.Scalar() + "'");
    }
  }

  template <class T>
  T convert(const YAML::Node& n, const std::string& path) const {
    if constexpr (std::is_same_v<T, std::optional<double>>) {
      if (n.IsScalar() && n.Scalar() == "auto") return std::nullopt;
      return scalar<double>(n, path);
    } else if constexpr (std::is_same_v<T, std::vector<std::vector<double>>>) {
      if (!n.IsSequence()) fail(n.Mark(), path, "expected a list of points");
      T out;
      for (std::size_t i = 0; i < n.size(); ++i) {
        out.push_back(convert<std::vector<double>>(n[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    } else if constexpr (is_vector<T>::value) {
      if (!n.IsSequence()) fail(n.Mark(), path, "expected a list");
      T out;
      for (std::size_t i = 0; i < n.size(); ++i) {
        out.push_back(scalar<typename T::value_type>(n[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    } else {
      return scalar<T>(n, path);
    }
  }

  template <class T>
  struct is_vector : std::false_type {};
  template <class U>
  struct is_vector<std::vector<U>> : std::true_type {};

  std::string source_;
};

template <class T>
bool sorted_strict(const std::vector<T>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

}  // namespace

std::vector<ConfigIssue> validate(const ExperimentConfig& c) {
  std::vector<ConfigIssue> out;
  auto issue = [&](std::string path, std::string msg) {
    out.push_back({std::move(path), std::move(msg)});
  };
  if (c.name.empty()) issue("name", "must not be empty");
  if (c.n_train == 0) issue("domain.n_train", "must be positive");
  if (c.n_test == 0) issue("domain.n_test", "must be positive");
  if (c.domain.domain != Domain::Contextual) {
    if (c.domain.sizes.empty()) issue("domain.sizes", "must not be empty");
    for (int s : c.domain.sizes) {
      if (s < 1) issue("domain.sizes", "sizes must be positive");
    }
  }
  if (!(c.box_hi > c.box_lo)) issue("model.box", "upper end must exceed lower end");

  const auto& p = c.perturbation;
  if (!(p.lambda >= 0.0)) issue("perturbation.lambda", "must be nonnegative");
  if (!(p.epsilon0 >= 0.0)) issue("perturbation.epsilon0", "must be nonnegative");
  if (p.lambda < p.epsilon0) issue("perturbation.lambda", "must be >= epsilon0");
  if (p.mc_samples == 0) issue("perturbation.K", "must be positive");

  const auto& o = c.optimizer;
  if (o.method != "ksos" && o.method != "random_search" && o.method != "nelder_mead") {
    issue("optimizer.method", "expected ksos, random_search or nelder_mead");
  }
  try {
    parse_baseline(o.baseline);
  } catch (const Error&) {
    issue("optimizer.baseline", "expected random_search or nelder_mead");
  }
  if (o.M < 2) issue("optimizer.M", "must be at least 2");
  if (o.lambda_phi && *o.lambda_phi < 0.0) issue("optimizer.lambda_phi", "must be nonnegative");
  if (!(o.cbar > 0.0)) issue("optimizer.cbar", "must be positive");
  if (!(o.delta > 0.0 && o.delta < 1.0)) issue("optimizer.delta", "must lie in (0, 1)");
  if (o.random_policies == 0) issue("optimizer.random_policies", "must be positive");

  const auto& s = c.sweep;
  if (s.lambda_grid.empty()) issue("sweep.lambda_grid", "must not be empty");
  if (!sorted_strict(s.lambda_grid)) issue("sweep.lambda_grid", "must be strictly increasing");
  for (double l : s.lambda_grid) {
    if (l < p.epsilon0) {
      issue("sweep.lambda_grid", "every lambda must be >= perturbation.epsilon0");
      break;
    }
    if (!(l > 0.0)) {
      issue("sweep.lambda_grid", "every lambda must be positive");
      break;
    }
  }
  if (s.w.empty()) issue("sweep.w", "must list at least one parameter");
  if (!(s.tau > 0.0 && s.tau < 1.0)) issue("sweep.tau", "must lie in (0, 1)");
  if (s.n_instances == 0) issue("sweep.n_instances", "must be positive");
  if (s.seeds == 0) issue("sweep.seeds", "must be positive");
  if (s.n_grid.empty()) issue("sweep.n_grid", "must not be empty");
  if (!sorted_strict(s.n_grid)) issue("sweep.n_grid", "must be strictly increasing");
  if (!s.n_grid.empty() && s.n_grid.front() == 0) issue("sweep.n_grid", "must be positive");
  if (!(s.nprocess_lambda > 0.0)) issue("sweep.nprocess_lambda", "must be positive");
  if (s.nprocess_lambda < p.epsilon0) issue("sweep.nprocess_lambda", "must be >= epsilon0");
  if (s.w_grid_points == 0) issue("sweep.w_grid_points", "must be positive");
  if (!s.n_grid.empty() && s.pool_size < 10 * s.n_grid.back()) {
    issue("sweep.pool_size", "must be at least 10x the largest n");
  }
  if (!(s.dudley_constant > 0.0)) issue("sweep.dudley_constant", "must be positive");
  if (!(s.delta > 0.0 && s.delta < 1.0)) issue("sweep.delta", "must lie in (0, 1)");
  if (s.M_grid.empty()) issue("sweep.M_grid", "must not be empty");
  if (!sorted_strict(s.M_grid)) issue("sweep.M_grid", "must be strictly increasing");
  if (!s.M_grid.empty() && s.M_grid.front() < 2) issue("sweep.M_grid", "entries must be >= 2");
  if (s.ksos_dims.empty()) issue("sweep.ksos_dims", "must not be empty");
  for (int d : s.ksos_dims) {
    if (d < 1 || d > 4) issue("sweep.ksos_dims", "dimensions must lie in 1..4");
  }
  if (s.ksos_cbar.size() != s.ksos_dims.size()) {
    issue("sweep.ksos_cbar", "needs one entry per ksos dimension");
  }
  for (double b : s.ksos_cbar) {
    if (!(b > 0.0)) issue("sweep.ksos_cbar", "entries must be positive");
  }
  static const std::set<std::string> known{"oracle", "p_lambda", "lipschitz",
                                           "gauss_tail", "bias", "uw"};
  for (const auto& k : c.check.checks) {
    if (!known.count(k)) issue("check.checks", "unknown check '" + k + "'");
  }
  if (c.check.trials == 0) issue("check.trials", "must be positive");
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  Reader r(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    r.fail(e.mark, "", e.msg);
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  r.require_map(root, "");
  r.allow(root, "", {"name", "master_seed", "output_dir", "domain", "model", "perturbation",
                     "optimizer", "sweep", "check"});
  r.get(root, "", "name", c.name);
  r.get(root, "", "master_seed", c.master_seed);
  r.get(root, "", "output_dir", c.output_dir);

  if (const auto d = root["domain"]) {
    r.require_map(d, "domain");
    r.allow(d, "domain",
            {"kind", "sizes", "n_train", "n_test", "release_max", "processing_min",
             "processing_max", "rank_features", "window", "slack_max", "delay_scale_min",
             "delay_scale_max", "delay_cap", "n_scenarios", "c_delay", "c_vehicle", "take_cost"});
    std::string kind = domain_name(c.domain.domain);
    r.get(d, "domain", "kind", kind);
    try {
      c.domain.domain = parse_domain(kind);
    } catch (const Error&) {
      r.fail(r.marks["domain.kind"], "domain.kind",
             "expected scheduling, stovsp or contextual, got '" + kind + "'");
    }
    auto& s = c.domain;
    r.get(d, "domain", "sizes", s.sizes);
    r.get(d, "domain", "n_train", c.n_train);
    r.get(d, "domain", "n_test", c.n_test);
    r.get(d, "domain", "release_max", s.release_max);
    r.get(d, "domain", "processing_min", s.processing_min);
    r.get(d, "domain", "processing_max", s.processing_max);
    r.get(d, "domain", "rank_features", s.rank_features);
    r.get(d, "domain", "window", s.window);
    r.get(d, "domain", "slack_max", s.slack_max);
    r.get(d, "domain", "delay_scale_min", s.delay_scale_min);
    r.get(d, "domain", "delay_scale_max", s.delay_scale_max);
    r.get(d, "domain", "delay_cap", s.delay_cap);
    r.get(d, "domain", "n_scenarios", s.n_scenarios);
    r.get(d, "domain", "c_delay", s.c_delay);
    r.get(d, "domain", "c_vehicle", s.c_vehicle);
    r.get(d, "domain", "take_cost", s.take_cost);
  }
  if (const auto m = root["model"]) {
    r.require_map(m, "model");
    r.allow(m, "model", {"box"});
    std::vector<double> box{c.box_lo, c.box_hi};
    r.get(m, "model", "box", box);
    if (box.size() != 2) r.fail(r.marks["model.box"], "model.box", "expected [lower, upper]");
    c.box_lo = box[0];
    c.box_hi = box[1];
  }
  if (const auto p = root["perturbation"]) {
    r.require_map(p, "perturbation");
    r.allow(p, "perturbation", {"lambda", "epsilon0", "K"});
    r.get(p, "perturbation", "lambda", c.perturbation.lambda);
    r.get(p, "perturbation", "epsilon0", c.perturbation.epsilon0);
    r.get(p, "perturbation", "K", c.perturbation.mc_samples);
  }
  if (const auto o = root["optimizer"]) {
    r.require_map(o, "optimizer");
    r.allow(o, "optimizer",
            {"method", "M", "s", "lambda_phi", "cbar", "delta", "baseline", "baseline_budget",
             "random_policies"});
    auto& oc = c.optimizer;
    r.get(o, "optimizer", "method", oc.method);
    r.get(o, "optimizer", "M", oc.M);
    r.get(o, "optimizer", "s", oc.s);
    r.get(o, "optimizer", "lambda_phi", oc.lambda_phi);
    r.get(o, "optimizer", "cbar", oc.cbar);
    r.get(o, "optimizer", "delta", oc.delta);
    r.get(o, "optimizer", "baseline", oc.baseline);
    r.get(o, "optimizer", "baseline_budget", oc.baseline_budget);
    r.get(o, "optimizer", "random_policies", oc.random_policies);
  }
  if (const auto s = root["sweep"]) {
    r.require_map(s, "sweep");
    r.allow(s, "sweep",
            {"lambda_grid", "w", "tau", "n_instances", "seeds", "n_grid", "nprocess_lambda",
             "w_grid_points", "pool_size", "dudley_constant", "delta", "M_grid", "ksos_dims",
             "ksos_cbar"});
    auto& sc = c.sweep;
    r.get(s, "sweep", "lambda_grid", sc.lambda_grid);
    r.get(s, "sweep", "w", sc.w);
    r.get(s, "sweep", "tau", sc.tau);
    r.get(s, "sweep", "n_instances", sc.n_instances);
    r.get(s, "sweep", "seeds", sc.seeds);
    r.get(s, "sweep", "n_grid", sc.n_grid);
    r.get(s, "sweep", "nprocess_lambda", sc.nprocess_lambda);
    r.get(s, "sweep", "w_grid_points", sc.w_grid_points);
    r.get(s, "sweep", "pool_size", sc.pool_size);
    r.get(s, "sweep", "dudley_constant", sc.dudley_constant);
    r.get(s, "sweep", "delta", sc.delta);
    r.get(s, "sweep", "M_grid", sc.M_grid);
    r.get(s, "sweep", "ksos_dims", sc.ksos_dims);
    r.get(s, "sweep", "ksos_cbar", sc.ksos_cbar);
  }
  if (const auto k = root["check"]) {
    r.require_map(k, "check");
    r.allow(k, "check", {"checks", "trials"});
    r.get(k, "check", "checks", c.check.checks);
    r.get(k, "check", "trials", c.check.trials);
  }
  c.perturbation.master_seed = c.master_seed;

  const auto issues = validate(c);
  if (!issues.empty()) {
    const auto& first = issues.front();
    YAML::Mark mark = YAML::Mark::null_mark();
    std::string path = first.path;
    if (auto it = r.marks.find(path); it != r.marks.end()) mark = it->second;
    std::string msg = first.message;
    if (issues.size() > 1) msg += " (and " + std::to_string(issues.size() - 1) + " more)";
    r.fail(mark, path, msg);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

namespace {

template <class T>
void emit_seq(YAML::Emitter& e, const std::vector<T>& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (const auto& x : v) e << x;
  e << YAML::EndSeq;
}

}  // namespace

std::string to_yaml(const ExperimentConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << c.name;
  e << YAML::Key << "master_seed" << YAML::Value << c.master_seed;
  e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;

  const auto& d = c.domain;
  e << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << domain_name(d.domain);
  e << YAML::Key << "sizes" << YAML::Value;
  emit_seq(e, d.sizes);
  e << YAML::Key << "n_train" << YAML::Value << c.n_train;
  e << YAML::Key << "n_test" << YAML::Value << c.n_test;
  e << YAML::Key << "release_max" << YAML::Value << d.release_max;
  e << YAML::Key << "processing_min" << YAML::Value << d.processing_min;
  e << YAML::Key << "processing_max" << YAML::Value << d.processing_max;
  e << YAML::Key << "rank_features" << YAML::Value << d.rank_features;
  e << YAML::Key << "window" << YAML::Value << d.window;
  e << YAML::Key << "slack_max" << YAML::Value << d.slack_max;
  e << YAML::Key << "delay_scale_min" << YAML::Value << d.delay_scale_min;
  e << YAML::Key << "delay_scale_max" << YAML::Value << d.delay_scale_max;
  e << YAML::Key << "delay_cap" << YAML::Value << d.delay_cap;
  e << YAML::Key << "n_scenarios" << YAML::Value << d.n_scenarios;
  e << YAML::Key << "c_delay" << YAML::Value << d.c_delay;
  e << YAML::Key << "c_vehicle" << YAML::Value << d.c_vehicle;
  e << YAML::Key << "take_cost" << YAML::Value << d.take_cost;
  e << YAML::EndMap;

  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "box" << YAML::Value;
  emit_seq(e, std::vector<double>{c.box_lo, c.box_hi});
  e << YAML::EndMap;

  e << YAML::Key << "perturbation" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "lambda" << YAML::Value << c.perturbation.lambda;
  e << YAML::Key << "epsilon0" << YAML::Value << c.perturbation.epsilon0;
  e << YAML::Key << "K" << YAML::Value << c.perturbation.mc_samples;
  e << YAML::EndMap;

  const auto& o = c.optimizer;
  e << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "method" << YAML::Value << o.method;
  e << YAML::Key << "M" << YAML::Value << o.M;
  e << YAML::Key << "s" << YAML::Value << o.s;
  e << YAML::Key << "lambda_phi" << YAML::Value;
  if (o.lambda_phi) {
    e << *o.lambda_phi;
  } else {
    e << "auto";
  }
  e << YAML::Key << "cbar" << YAML::Value << o.cbar;
  e << YAML::Key << "delta" << YAML::Value << o.delta;
  e << YAML::Key << "baseline" << YAML::Value << o.baseline;
  e << YAML::Key << "baseline_budget" << YAML::Value << o.baseline_budget;
  e << YAML::Key << "random_policies" << YAML::Value << o.random_policies;
  e << YAML::EndMap;

  const auto& s = c.sweep;
  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "lambda_grid" << YAML::Value;
  emit_seq(e, s.lambda_grid);
  e << YAML::Key << "w" << YAML::Value << YAML::BeginSeq;
  for (const auto& w : s.w) emit_seq(e, w);
  e << YAML::EndSeq;
  e << YAML::Key << "tau" << YAML::Value << s.tau;
  e << YAML::Key << "n_instances" << YAML::Value << s.n_instances;
  e << YAML::Key << "seeds" << YAML::Value << s.seeds;
  e << YAML::Key << "n_grid" << YAML::Value;
  emit_seq(e, s.n_grid);
  e << YAML::Key << "nprocess_lambda" << YAML::Value << s.nprocess_lambda;
  e << YAML::Key << "w_grid_points" << YAML::Value << s.w_grid_points;
  e << YAML::Key << "pool_size" << YAML::Value << s.pool_size;
  e << YAML::Key << "dudley_constant" << YAML::Value << s.dudley_constant;
  e << YAML::Key << "delta" << YAML::Value << s.delta;
  e << YAML::Key << "M_grid" << YAML::Value;
  emit_seq(e, s.M_grid);
  e << YAML::Key << "ksos_dims" << YAML::Value;
  emit_seq(e, s.ksos_dims);
  e << YAML::Key << "ksos_cbar" << YAML::Value;
  emit_seq(e, s.ksos_cbar);
  e << YAML::EndMap;

  e << YAML::Key << "check" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "checks" << YAML::Value;
  emit_seq(e, c.check.checks);
  e << YAML::Key << "trials" << YAML::Value << c.check.trials;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace perturbopt::harness
