#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include "perturbopt/parallel.hpp"
#include "perturbopt/problems.hpp"
#include "perturbopt/rng.hpp"

namespace perturbopt {
namespace {

// Rank of each entry in [0, 1]; ties keep index order.
Vector normalized_ranks(const Vector& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  Vector r = Vector::Zero(n);
  if (n < 2) return r;
  for (Eigen::Index k = 0; k < n; ++k) r[idx[static_cast<std::size_t>(k)]] = double(k) / (n - 1);
  return r;
}

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

double scheduling_cost(const Vector& y, const Instance& x) {
  const int n = x.partition;
  if (y.size() != n) throw DimensionError("schedule has the wrong length");
  std::vector<char> seen(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    const double r = std::round(y[i]);
    if (r != y[i] || r < 1 || r > n || seen[static_cast<int>(r)]) {
      throw InvalidArgument("solution is not a permutation of 1..n");
    }
    seen[static_cast<int>(r)] = 1;
  }
  double clock = 0.0;
  double total = 0.0;
  for (int j : schedule_order(y)) {
    clock = std::max(clock, x.scheduling.release[j]) + x.scheduling.processing[j];
    total += clock;
  }
  return total;
}

double vsp_cost(const CostOracle& oracle, const Vector& y, const Instance& x) {
  const VspNetwork& net = x.polytope->vsp();
  const int T = net.n_tasks;
  if (y.size() != net.dimension()) throw DimensionError("flow has the wrong length");
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (!is_binary(y[j])) throw InvalidArgument("flow is not integral");
  }
  std::vector<int> in_count(T, 0), out_count(T, 0), succ(T, -1), pred(T, -1);
  std::vector<int> succ_arc(T, -1);
  for (int v = 0; v < T; ++v) {
    if (y[net.source_arc(v)] == 1.0) ++in_count[v];
    if (y[net.sink_arc(v)] == 1.0) ++out_count[v];
  }
  for (std::size_t e = 0; e < net.compat.size(); ++e) {
    if (y[net.compat_arc(e)] != 1.0) continue;
    const auto [u, v] = net.compat[e];
    ++out_count[u];
    ++in_count[v];
    succ[u] = v;
    succ_arc[u] = static_cast<int>(e);
    pred[v] = u;
  }
  int paths = 0;
  for (int v = 0; v < T; ++v) {
    if (in_count[v] != 1 || out_count[v] != 1) {
      throw InvalidArgument("flow does not cover every task exactly once");
    }
    if (pred[v] < 0) ++paths;
  }
  const RowMatrix& sc = x.vsp.scenarios;
  double delay_sum = 0.0;
  for (Eigen::Index s = 0; s < sc.rows(); ++s) {
    for (int start = 0; start < T; ++start) {
      if (pred[start] >= 0) continue;
      double delay = sc(s, start);
      delay_sum += delay;
      for (int u = start; succ[u] >= 0; u = succ[u]) {
        const int v = succ[u];
        delay = std::max(0.0, delay - x.vsp.slack[succ_arc[u]]) + sc(s, v);
        delay_sum += delay;
      }
    }
  }
  const double mean_delay = sc.rows() > 0 ? delay_sum / static_cast<double>(sc.rows()) : 0.0;
  return oracle.c_delay * mean_delay + oracle.c_vehicle * paths;
}

double contextual_cost(const CostOracle& oracle, const Vector& y, const Instance& x) {
  if (y.size() != 1) throw DimensionError("contextual decision is one-dimensional");
  if (y[0] == 1.0) return oracle.take_cost;
  if (y[0] == 0.0) return x.contextual.xi;
  throw InvalidArgument("contextual decision must be 0 or 1");
}

}  // namespace

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::Scheduling:
      return "scheduling";
    case Domain::StoVsp:
      return "stovsp";
    case Domain::Contextual:
      return "contextual";
  }
  return "unknown";
}

Domain parse_domain(std::string_view name) {
  if (name == "scheduling") return Domain::Scheduling;
  if (name == "stovsp") return Domain::StoVsp;
  if (name == "contextual") return Domain::Contextual;
  throw InvalidArgument("unknown domain '" + std::string(name) + "'");
}

int DomainSpec::feature_dimension() const {
  switch (domain) {
    case Domain::Scheduling:
      return rank_features ? 4 : 2;
    case Domain::StoVsp:
      return 5;
    case Domain::Contextual:
      return 2;
  }
  return 0;
}

std::vector<int> schedule_order(const Vector& y) {
  std::vector<int> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return y[a] > y[b]; });
  return order;
}

CostOracle make_cost_oracle(const DomainSpec& spec) {
  CostOracle o;
  switch (spec.domain) {
    case Domain::Scheduling:
      o.kind = CostKind::SchedulingCompletionTime;
      break;
    case Domain::StoVsp:
      o.kind = CostKind::StoVspDelayCost;
      break;
    case Domain::Contextual:
      o.kind = CostKind::Contextual;
      break;
  }
  o.c_delay = spec.c_delay;
  o.c_vehicle = spec.c_vehicle;
  o.take_cost = spec.take_cost;
  if (spec.domain == Domain::Contextual) {
    o.bounds[1] = declared_bounds(spec, 1);
  } else {
    for (int cell : spec.sizes) o.bounds[cell] = declared_bounds(spec, cell);
  }
  return o;
}

double eval_cost(const CostOracle& oracle, const Vector& y, const Instance& x) {
  switch (oracle.kind) {
    case CostKind::SchedulingCompletionTime:
      return scheduling_cost(y, x);
    case CostKind::StoVspDelayCost:
      return vsp_cost(oracle, y, x);
    case CostKind::Contextual:
      return contextual_cost(oracle, y, x);
  }
  throw InvalidArgument("unknown cost kind");
}

CostBounds declared_bounds(const DomainSpec& spec, int partition) {
  const double n = partition;
  switch (spec.domain) {
    case Domain::Scheduling:
      return {spec.processing_min * n * (n + 1) / 2,
              n * spec.release_max + spec.processing_max * n * (n + 1) / 2};
    case Domain::StoVsp:
      return {spec.c_vehicle,
              spec.c_delay * spec.delay_scale_max * spec.delay_cap * n * (n + 1) / 2 +
                  spec.c_vehicle * n};
    case Domain::Contextual:
      return {std::min(spec.take_cost, contextual_xi(-1.0, 1.0, -1.0)),
              std::max(spec.take_cost, contextual_xi(1.0, -1.0, 1.0))};
  }
  return {};
}

double osc_bound(const CostOracle& oracle, const Instance& x) {
  return osc_bound(oracle, std::vector<Instance>{x});
}

double osc_bound(const CostOracle& oracle, const std::vector<Instance>& xs) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Instance& x : xs) {
    const RowMatrix& v = x.polytope->vertices();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const double f = eval_cost(oracle, v.row(i).transpose(), x);
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
  }
  return xs.empty() ? 0.0 : hi - lo;
}

double osc_bound(const DomainSpec& spec, int partition) {
  return declared_bounds(spec, partition).osc();
}

double contextual_xi(double u1, double u2, double noise) {
  return 1.0 + 0.8 * u1 - 0.4 * u2 + 0.5 * noise;
}

Instance make_scheduling_instance(const Vector& release, const Vector& processing,
                                  const DomainSpec& spec, PolytopePtr polytope) {
  const Eigen::Index n = release.size();
  if (n < 1 || processing.size() != n) throw InvalidArgument("job data sizes differ");
  if (!polytope) {
    polytope = std::make_shared<SolutionPolytope>(SolutionPolytope::permutahedron(int(n)));
  }
  Instance x;
  x.domain = Domain::Scheduling;
  x.partition = static_cast<int>(n);
  x.polytope = std::move(polytope);
  x.scheduling = {release, processing};
  x.features = Matrix::Zero(n, spec.rank_features ? 4 : 2);
  const double rmax = spec.release_max > 0 ? spec.release_max : 1.0;
  x.features.col(0) = release / rmax;
  x.features.col(1) = processing / spec.processing_max;
  if (spec.rank_features) {
    x.features.col(2) = normalized_ranks(release);
    x.features.col(3) = normalized_ranks(processing);
  }
  return x;
}

VspNetwork vsp_network(int n_tasks, int window) {
  VspNetwork net;
  net.n_tasks = n_tasks;
  for (int u = 0; u < n_tasks; ++u) {
    for (int v = u + 1; v < n_tasks && v - u <= window; ++v) net.compat.emplace_back(u, v);
  }
  return net;
}

Instance make_vsp_instance(const VspNetwork& net, const Vector& slack, const Vector& delay_scale,
                           const RowMatrix& scenarios, const DomainSpec& spec,
                           PolytopePtr polytope) {
  const int T = net.n_tasks;
  if (slack.size() != static_cast<Eigen::Index>(net.compat.size()) ||
      delay_scale.size() != T || scenarios.cols() != T) {
    throw InvalidArgument("vehicle scheduling data sizes do not match the network");
  }
  if (!polytope) polytope = std::make_shared<SolutionPolytope>(SolutionPolytope::vsp_flow(net));
  Instance x;
  x.domain = Domain::StoVsp;
  x.partition = T;
  x.polytope = std::move(polytope);
  x.vsp = {slack, delay_scale, scenarios};

  std::vector<int> outdeg(T, 0);
  for (const auto& [u, v] : net.compat) ++outdeg[u];
  const int max_out = std::max(1, *std::max_element(outdeg.begin(), outdeg.end()));
  const double slack_norm = spec.slack_max * std::max(1, spec.window);
  const Vector pct = normalized_ranks(slack);

  x.features = Matrix::Zero(net.dimension(), 5);
  for (int v = 0; v < T; ++v) {
    x.features(net.source_arc(v), 2) = delay_scale[v] / spec.delay_scale_max;
    x.features(net.source_arc(v), 4) = 1.0;
  }
  for (std::size_t e = 0; e < net.compat.size(); ++e) {
    const int u = net.compat[e].first;
    const int row = net.compat_arc(e);
    x.features(row, 0) = std::min(1.0, slack[static_cast<Eigen::Index>(e)] / slack_norm);
    x.features(row, 1) = pct[static_cast<Eigen::Index>(e)];
    x.features(row, 2) = delay_scale[u] / spec.delay_scale_max;
    x.features(row, 3) = double(outdeg[u]) / max_out;
  }
  return x;
}

PolytopePtr contextual_polytope() {
  RowMatrix v(2, 1);
  v << 0.0, 1.0;
  return std::make_shared<SolutionPolytope>(SolutionPolytope::explicit_set(v));
}

Instance make_contextual_instance(double u1, double u2, double noise, PolytopePtr polytope) {
  Instance x;
  x.domain = Domain::Contextual;
  x.partition = 1;
  x.polytope = polytope ? std::move(polytope) : contextual_polytope();
  x.contextual.context = Vector(2);
  x.contextual.context << u1, u2;
  x.contextual.noise = noise;
  x.contextual.xi = contextual_xi(u1, u2, noise);
  x.features = Matrix(1, 2);
  x.features << u1, u2;
  return x;
}

std::vector<Instance> generate_instances(const DomainSpec& spec, std::size_t count,
                                         std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("instance count must be positive");
  if (spec.domain != Domain::Contextual) {
    if (spec.sizes.empty()) throw InvalidArgument("no partition sizes given");
    for (int s : spec.sizes) {
      if (s < 1) throw InvalidArgument("partition sizes must be positive");
    }
  }
  if (spec.domain == Domain::Scheduling &&
      (spec.processing_min <= 0 || spec.processing_max < spec.processing_min ||
       spec.release_max < 0)) {
    throw InvalidArgument("scheduling feature box is empty");
  }
  if (spec.domain == Domain::StoVsp && (spec.n_scenarios < 1 || spec.window < 1)) {
    throw InvalidArgument("vehicle scheduling needs scenarios and a positive window");
  }

  std::map<int, PolytopePtr> cells;
  if (spec.domain == Domain::Contextual) {
    cells[1] = contextual_polytope();
  } else {
    for (int s : spec.sizes) {
      if (cells.count(s)) continue;
      cells[s] = spec.domain == Domain::Scheduling
                     ? std::make_shared<SolutionPolytope>(SolutionPolytope::permutahedron(s))
                     : std::make_shared<SolutionPolytope>(
                           SolutionPolytope::vsp_flow(vsp_network(s, spec.window)));
    }
  }

  std::vector<Instance> out(count);
  parallel_for(count, [&](std::size_t i) {
    Stream rng(seed, "instances", {i});
    Instance x;
    if (spec.domain == Domain::Contextual) {
      const double u1 = rng.uniform(-1.0, 1.0);
      const double u2 = rng.uniform(-1.0, 1.0);
      const double noise = rng.uniform(-1.0, 1.0);
      x = make_contextual_instance(u1, u2, noise, cells.at(1));
    } else {
      const int cell = spec.sizes[rng.index(spec.sizes.size())];
      if (spec.domain == Domain::Scheduling) {
        Vector r(cell), p(cell);
        for (int j = 0; j < cell; ++j) {
          r[j] = rng.uniform(0.0, spec.release_max);
          p[j] = rng.uniform(spec.processing_min, spec.processing_max);
        }
        x = make_scheduling_instance(r, p, spec, cells.at(cell));
      } else {
        const VspNetwork& net = cells.at(cell)->vsp();
        Vector slack(static_cast<Eigen::Index>(net.compat.size()));
        for (std::size_t e = 0; e < net.compat.size(); ++e) {
          const int gap = net.compat[e].second - net.compat[e].first;
          slack[static_cast<Eigen::Index>(e)] = rng.uniform(0.0, spec.slack_max * gap);
        }
        Vector scale(cell);
        for (int v = 0; v < cell; ++v) {
          scale[v] = rng.uniform(spec.delay_scale_min, spec.delay_scale_max);
        }
        const std::uint64_t scenario_seed = derive_seed(seed, "scenario", {i});
        Stream sc(scenario_seed);
        RowMatrix scenarios(spec.n_scenarios, cell);
        for (int s = 0; s < spec.n_scenarios; ++s) {
          for (int v = 0; v < cell; ++v) {
            const double e = -std::log1p(-sc.uniform());
            scenarios(s, v) = scale[v] * std::min(e, spec.delay_cap);
          }
        }
        x = make_vsp_instance(net, slack, scale, scenarios, spec, cells.at(cell));
        x.scenario_seed = scenario_seed;
      }
    }
    x.id = i;
    out[i] = std::move(x);
  });
  return out;
}

}  // namespace perturbopt
