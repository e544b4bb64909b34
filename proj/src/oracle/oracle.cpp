#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include "combinatorial.hpp"
#include "perturbopt/oracle.hpp"
#include "perturbopt/simd/kernels.hpp"

namespace perturbopt {
namespace {

void validate_direction(const SolutionPolytope& poly, const Vector& theta) {
  if (theta.size() != poly.dimension()) {
    throw DimensionError("direction has dimension " + std::to_string(theta.size()) +
                         ", polytope " + poly.describe() + " has " +
                         std::to_string(poly.dimension()));
  }
  if (!theta.allFinite()) throw InvalidArgument("direction has non-finite entries");
}

OracleResult permutahedron_oracle(int n, const Vector& theta) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return theta[a] < theta[b] || (theta[a] == theta[b] && a < b);
  });
  OracleResult r;
  r.y = Vector::Zero(n);
  for (int k = 0; k < n; ++k) r.y[order[k]] = k + 1;
  r.value = r.y.dot(theta);
  for (int k = 0; k + 1 < n; ++k) {
    if (theta[order[k + 1]] - theta[order[k]] <= kTieTolerance) r.tie = true;
  }
  return r;
}

OracleResult dag_oracle(const Dag& dag, const Vector& theta) {
  const auto order = detail::topological_order(dag);
  const auto best = detail::longest_path(dag, order, theta, {});
  if (!best.feasible) throw InvalidArgument("no path from source to sink");
  OracleResult r;
  r.y = Vector::Zero(static_cast<Eigen::Index>(dag.arcs.size()));
  for (int a : best.arcs) r.y[a] = 1.0;
  r.value = r.y.dot(theta);
  // Any other path avoids at least one arc of the optimal one.
  std::vector<char> banned(dag.arcs.size(), 0);
  for (int a : best.arcs) {
    banned[a] = 1;
    const auto alt = detail::longest_path(dag, order, theta, banned);
    banned[a] = 0;
    if (alt.feasible && r.value - alt.value <= kTieTolerance) {
      r.tie = true;
      break;
    }
  }
  return r;
}

OracleResult vsp_oracle(const VspNetwork& net, const Vector& theta) {
  const int T = net.n_tasks;
  std::vector<detail::MatchingArc> arcs(net.compat.size());
  double base = 0.0;
  for (int v = 0; v < T; ++v) base += theta[net.source_arc(v)] + theta[net.sink_arc(v)];
  for (std::size_t e = 0; e < net.compat.size(); ++e) {
    const auto [u, v] = net.compat[e];
    // Chaining u -> v replaces u's trip to the depot and v's trip from it.
    arcs[e] = {u, v, theta[net.compat_arc(e)] - theta[net.sink_arc(u)] - theta[net.source_arc(v)]};
  }
  const auto best = detail::max_weight_matching(T, arcs, {}, {}, {});

  OracleResult r;
  r.y = Vector::Zero(net.dimension());
  std::vector<char> has_pred(T, 0), has_succ(T, 0), in_matching(arcs.size(), 0);
  for (int e : best.chosen) {
    r.y[net.compat_arc(e)] = 1.0;
    has_succ[arcs[e].tail] = 1;
    has_pred[arcs[e].head] = 1;
    in_matching[e] = 1;
  }
  for (int v = 0; v < T; ++v) {
    if (!has_pred[v]) r.y[net.source_arc(v)] = 1.0;
    if (!has_succ[v]) r.y[net.sink_arc(v)] = 1.0;
  }
  r.value = r.y.dot(theta);

  // Every other partition drops an arc of the optimal matching or uses an
  // arc outside it; the runner-up is the best of those restricted problems.
  const double best_gain = best.value;
  std::vector<char> disabled(arcs.size(), 0);
  std::vector<char> blocked_tail(T, 0), blocked_head(T, 0);
  for (std::size_t e = 0; e < arcs.size() && !r.tie; ++e) {
    double alt = 0.0;
    if (in_matching[e]) {
      disabled[e] = 1;
      alt = detail::max_weight_matching(T, arcs, disabled, {}, {}).value;
      disabled[e] = 0;
    } else {
      blocked_tail[arcs[e].tail] = 1;
      blocked_head[arcs[e].head] = 1;
      alt = arcs[e].gain +
            detail::max_weight_matching(T, arcs, {}, blocked_tail, blocked_head).value;
      blocked_tail[arcs[e].tail] = 0;
      blocked_head[arcs[e].head] = 0;
    }
    if (best_gain - alt <= kTieTolerance) r.tie = true;
  }
  return r;
}

std::vector<double> scores(const SolutionPolytope& poly, const Vector& theta) {
  const RowMatrix& v = poly.vertices();
  std::vector<double> out(static_cast<std::size_t>(v.rows()));
  simd::dot_rows(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())),
                 static_cast<std::size_t>(v.cols()),
                 std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())),
                 out);
  return out;
}

EnumeratedArgmax argmax_of(const std::vector<double>& s) {
  EnumeratedArgmax r;
  r.value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] > r.value) {
      r.value = s[i];
      r.index = i;
    }
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != r.index && r.value - s[i] <= kTieTolerance) {
      r.tie = true;
      break;
    }
  }
  return r;
}

}  // namespace

OracleResult linear_oracle(const SolutionPolytope& poly, const Vector& theta) {
  validate_direction(poly, theta);
  switch (poly.kind()) {
    case PolytopeKind::Permutahedron:
      return permutahedron_oracle(poly.permutation_size(), theta);
    case PolytopeKind::DagPaths:
      return dag_oracle(poly.dag(), theta);
    case PolytopeKind::VspFlow:
      return vsp_oracle(poly.vsp(), theta);
    case PolytopeKind::Explicit: {
      const auto best = brute_force_oracle(poly, theta);
      return {poly.vertex(best.index), best.value, best.tie};
    }
  }
  throw InvalidArgument("unknown polytope kind");
}

EnumeratedArgmax brute_force_oracle(const SolutionPolytope& poly, const Vector& theta) {
  validate_direction(poly, theta);
  return argmax_of(scores(poly, theta));
}

double internal_radius(const SolutionPolytope& poly, const Vector& theta) {
  validate_direction(poly, theta);
  const auto s = scores(poly, theta);
  const auto best = argmax_of(s);
  if (best.tie) return 0.0;
  const RowMatrix& v = poly.vertices();
  std::vector<double> sq(s.size());
  simd::sqdist_rows(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())),
                    static_cast<std::size_t>(v.cols()),
                    std::span<const double>(v.row(static_cast<Eigen::Index>(best.index)).data(),
                                            static_cast<std::size_t>(v.cols())),
                    sq);
  double rho = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j == best.index) continue;
    rho = std::min(rho, (best.value - s[j]) / std::sqrt(sq[j]));
  }
  // A single vertex: every direction lies in the interior of its cone.
  return std::max(rho, 0.0);
}

SurrogatePolicyMeasure p0(const SolutionPolytope& poly, const Vector& theta, Stream& stream,
                          std::size_t samples) {
  validate_direction(poly, theta);
  SurrogatePolicyMeasure m;
  const auto best = argmax_of(scores(poly, theta));
  if (!best.tie) {
    m.is_dirac = true;
    m.support.push_back({best.index, poly.vertex(best.index), 1.0, 0.0});
    return m;
  }
  if (samples == 0) throw InvalidArgument("p0 needs at least one sample to split a tie");
  const double radius = kP0RadiusFactor * (1.0 + theta.norm());
  std::vector<std::size_t> counts(poly.vertex_count(), 0);
  for (std::size_t k = 0; k < samples; ++k) {
    const Vector shifted = theta + radius * stream.unit_ball(poly.dimension());
    ++counts[argmax_of(scores(poly, shifted)).index];
  }
  const double K = static_cast<double>(samples);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    const double p = counts[i] / K;
    m.support.push_back({i, poly.vertex(i), p, std::sqrt(p * (1.0 - p) / K)});
  }
  m.is_dirac = m.support.size() == 1;
  return m;
}

std::vector<NormalCone> enumerate_normal_fan(const SolutionPolytope& poly) {
  const RowMatrix& v = poly.vertices();
  const Eigen::Index n = v.rows();
  std::vector<NormalCone> fan(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    NormalCone& cone = fan[static_cast<std::size_t>(i)];
    cone.index = static_cast<std::size_t>(i);
    cone.vertex = v.row(i).transpose();
    cone.normals.resize(n - 1, v.cols());
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto diff = v.row(i) - v.row(j);
      cone.normals.row(r++) = diff / diff.norm();
    }
  }
  return fan;
}

int centered_rank(const SolutionPolytope& poly) {
  const RowMatrix& v = poly.vertices();
  const Matrix centered = v.rowwise() - v.colwise().mean();
  Eigen::JacobiSVD<Matrix> svd(centered);
  svd.setThreshold(1e-10);
  return static_cast<int>(svd.rank());
}

}  // namespace perturbopt
