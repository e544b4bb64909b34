#pragma once

#include <cmath>
#include <vector>

#include "perturbopt/oracle.hpp"
#include "perturbopt/rng.hpp"

namespace testing {

using perturbopt::Dag;
using perturbopt::Stream;
using perturbopt::Vector;

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Chain 0 -> 1 -> ... -> m-1 plus random forward shortcuts, at most
/// max_arcs arcs in total.
inline Dag random_dag(Stream& rng, int nodes, int max_arcs) {
  Dag dag;
  dag.n_nodes = nodes;
  dag.source = 0;
  dag.sink = nodes - 1;
  for (int u = 0; u + 1 < nodes; ++u) dag.arcs.emplace_back(u, u + 1);
  int attempts = 0;
  while (static_cast<int>(dag.arcs.size()) < max_arcs && attempts++ < 200) {
    const int u = static_cast<int>(rng.index(static_cast<std::size_t>(nodes - 1)));
    const int v = u + 1 + static_cast<int>(rng.index(static_cast<std::size_t>(nodes - 1 - u)));
    bool seen = false;
    for (const auto& a : dag.arcs) seen = seen || (a.first == u && a.second == v);
    if (!seen || rng.uniform() < 0.2) dag.arcs.emplace_back(u, v);  // parallel arcs allowed
  }
  return dag;
}

inline Vector gaussian_vector(Stream& rng, int d, double scale = 1.0) {
  Vector v(d);
  for (int j = 0; j < d; ++j) v[j] = scale * rng.gaussian();
  return v;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace testing
