#include "combinatorial.hpp"

#include <limits>
#include <queue>

namespace perturbopt::detail {

std::vector<int> topological_order(const Dag& dag) {
  std::vector<int> indegree(dag.n_nodes, 0);
  std::vector<std::vector<int>> out(dag.n_nodes);
  for (std::size_t a = 0; a < dag.arcs.size(); ++a) {
    const auto [u, v] = dag.arcs[a];
    out[u].push_back(static_cast<int>(a));
    ++indegree[v];
  }
  // Min-heap keeps the order canonical.
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int v = 0; v < dag.n_nodes; ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<int> order;
  order.reserve(dag.n_nodes);
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int a : out[u]) {
      const int v = dag.arcs[a].second;
      if (--indegree[v] == 0) ready.push(v);
    }
  }
  if (static_cast<int>(order.size()) != dag.n_nodes) {
    throw InvalidArgument("graph has a directed cycle");
  }
  return order;
}

PathSolution longest_path(const Dag& dag, const std::vector<int>& order, const Vector& theta,
                          const std::vector<char>& banned) {
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<double> best(dag.n_nodes, kNone);
  std::vector<int> via(dag.n_nodes, -1);
  std::vector<std::vector<int>> out(dag.n_nodes);
  for (std::size_t a = 0; a < dag.arcs.size(); ++a) {
    if (!banned.empty() && banned[a]) continue;
    out[dag.arcs[a].first].push_back(static_cast<int>(a));
  }
  best[dag.source] = 0.0;
  for (int u : order) {
    if (best[u] == kNone) continue;
    for (int a : out[u]) {
      const int v = dag.arcs[a].second;
      const double candidate = best[u] + theta[a];
      if (candidate > best[v]) {
        best[v] = candidate;
        via[v] = a;
      }
    }
  }
  PathSolution sol;
  if (best[dag.sink] == kNone) return sol;
  sol.feasible = true;
  sol.value = best[dag.sink];
  for (int v = dag.sink; v != dag.source;) {
    const int a = via[v];
    sol.arcs.push_back(a);
    v = dag.arcs[a].first;
  }
  return sol;
}

namespace {

struct Edge {
  int to;
  int cap;
  double cost;
  int rev;
  int arc;  // matching arc index, -1 for source/sink edges
};

class FlowGraph {
 public:
  explicit FlowGraph(int n) : adj_(n) {}

  void add(int u, int v, double cost, int arc) {
    adj_[u].push_back({v, 1, cost, static_cast<int>(adj_[v].size()), arc});
    adj_[v].push_back({u, 0, -cost, static_cast<int>(adj_[u].size()) - 1, arc});
  }

  std::vector<std::vector<Edge>>& adj() { return adj_; }

 private:
  std::vector<std::vector<Edge>> adj_;
};

}  // namespace

MatchingSolution max_weight_matching(int n, const std::vector<MatchingArc>& arcs,
                                     const std::vector<char>& disabled,
                                     const std::vector<char>& blocked_tail,
                                     const std::vector<char>& blocked_head) {
  const int s = 0;
  const int t = 2 * n + 1;
  FlowGraph g(2 * n + 2);
  for (int u = 0; u < n; ++u) {
    if (blocked_tail.empty() || !blocked_tail[u]) g.add(s, 1 + u, 0.0, -1);
  }
  for (int v = 0; v < n; ++v) {
    if (blocked_head.empty() || !blocked_head[v]) g.add(1 + n + v, t, 0.0, -1);
  }
  for (std::size_t e = 0; e < arcs.size(); ++e) {
    if (!disabled.empty() && disabled[e]) continue;
    g.add(1 + arcs[e].tail, 1 + n + arcs[e].head, -arcs[e].gain, static_cast<int>(e));
  }

  auto& adj = g.adj();
  const int nodes = 2 * n + 2;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  MatchingSolution sol;
  for (;;) {
    std::vector<double> dist(nodes, kInf);
    std::vector<std::pair<int, int>> pred(nodes, {-1, -1});
    dist[s] = 0.0;
    for (int round = 0; round < nodes; ++round) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        if (dist[u] == kInf) continue;
        for (std::size_t i = 0; i < adj[u].size(); ++i) {
          const Edge& e = adj[u][i];
          if (e.cap > 0 && dist[u] + e.cost < dist[e.to]) {
            dist[e.to] = dist[u] + e.cost;
            pred[e.to] = {u, static_cast<int>(i)};
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    // Further augmentation would lower the total gain.
    if (!(dist[t] < 0.0)) break;
    for (int v = t; v != s;) {
      const auto [u, i] = pred[v];
      Edge& e = adj[u][i];
      e.cap -= 1;
      adj[v][e.rev].cap += 1;
      v = u;
    }
  }
  for (int u = 0; u < n; ++u) {
    for (const Edge& e : adj[1 + u]) {
      if (e.arc >= 0 && e.to > n && e.cap == 0) {
        sol.chosen.push_back(e.arc);
        sol.value += arcs[e.arc].gain;
      }
    }
  }
  return sol;
}

}  // namespace perturbopt::detail
