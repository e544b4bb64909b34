#pragma once

// Internal solvers behind linear_oracle.

#include <vector>

#include "perturbopt/oracle.hpp"

namespace perturbopt::detail {

/// Topological order of the DAG nodes; throws InvalidArgument on a cycle.
std::vector<int> topological_order(const Dag& dag);

struct PathSolution {
  bool feasible = false;
  double value = 0.0;
  std::vector<int> arcs;
};

/// Longest s-t path. Arcs with banned[a] set are skipped.
PathSolution longest_path(const Dag& dag, const std::vector<int>& order, const Vector& theta,
                          const std::vector<char>& banned);

struct MatchingArc {
  int tail = 0;
  int head = 0;
  double gain = 0.0;
};

struct MatchingSolution {
  double value = 0.0;
  std::vector<int> chosen;  ///< indices into the arc list
};

/// Maximum-weight (not maximum-cardinality) bipartite matching by successive
/// shortest augmenting paths with Bellman-Ford. Sides are both of size n;
/// arcs with disabled[e] set, and vertices flagged in blocked_tail /
/// blocked_head, are excluded.
MatchingSolution max_weight_matching(int n, const std::vector<MatchingArc>& arcs,
                                     const std::vector<char>& disabled,
                                     const std::vector<char>& blocked_tail,
                                     const std::vector<char>& blocked_head);

}  // namespace perturbopt::detail
