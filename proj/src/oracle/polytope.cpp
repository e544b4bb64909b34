#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "combinatorial.hpp"
#include "perturbopt/oracle.hpp"

namespace perturbopt {
namespace {

std::string vertex_key(const double* y, int dim) {
  std::string key(static_cast<std::size_t>(dim) * sizeof(long long), '\0');
  for (int j = 0; j < dim; ++j) {
    const long long v = std::llround(y[j] * 1024.0);
    std::copy_n(reinterpret_cast<const char*>(&v), sizeof v, key.data() + j * sizeof v);
  }
  return key;
}

// Fills rows until the cap is exceeded; returns false in that case.
bool enumerate_permutations(int n, std::vector<double>& out) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 1);
  std::size_t count = 0;
  do {
    if (++count > kEnumerationCap) return false;
    out.insert(out.end(), perm.begin(), perm.end());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return true;
}

bool enumerate_paths(const Dag& dag, std::vector<double>& out) {
  const int dim = static_cast<int>(dag.arcs.size());
  std::vector<std::vector<int>> adj(dag.n_nodes);
  for (int a = 0; a < dim; ++a) adj[dag.arcs[a].first].push_back(a);
  std::vector<double> current(dim, 0.0);
  std::size_t count = 0;
  bool within_cap = true;
  auto dfs = [&](auto&& self, int u) -> void {
    if (!within_cap) return;
    if (u == dag.sink) {
      if (++count > kEnumerationCap) {
        within_cap = false;
        return;
      }
      out.insert(out.end(), current.begin(), current.end());
      return;
    }
    for (int a : adj[u]) {
      current[a] = 1.0;
      self(self, dag.arcs[a].second);
      current[a] = 0.0;
    }
  };
  dfs(dfs, dag.source);
  return within_cap;
}

bool enumerate_partitions(const VspNetwork& net, std::vector<double>& out) {
  const int T = net.n_tasks;
  std::vector<std::vector<std::size_t>> into(T);
  for (std::size_t e = 0; e < net.compat.size(); ++e) into[net.compat[e].second].push_back(e);
  std::vector<char> tail_used(T, 0);
  std::vector<int> pred_arc(T, -1);
  std::size_t count = 0;
  bool within_cap = true;
  auto emit = [&] {
    std::vector<double> y(net.dimension(), 0.0);
    std::vector<char> has_succ(T, 0);
    for (int v = 0; v < T; ++v) {
      if (pred_arc[v] < 0) {
        y[net.source_arc(v)] = 1.0;
      } else {
        y[net.compat_arc(pred_arc[v])] = 1.0;
        has_succ[net.compat[pred_arc[v]].first] = 1;
      }
    }
    for (int v = 0; v < T; ++v) {
      if (!has_succ[v]) y[net.sink_arc(v)] = 1.0;
    }
    out.insert(out.end(), y.begin(), y.end());
  };
  auto rec = [&](auto&& self, int v) -> void {
    if (!within_cap) return;
    if (v == T) {
      if (++count > kEnumerationCap) {
        within_cap = false;
        return;
      }
      emit();
      return;
    }
    pred_arc[v] = -1;
    self(self, v + 1);
    for (std::size_t e : into[v]) {
      const int u = net.compat[e].first;
      if (tail_used[u]) continue;
      tail_used[u] = 1;
      pred_arc[v] = static_cast<int>(e);
      self(self, v + 1);
      tail_used[u] = 0;
      pred_arc[v] = -1;
    }
  };
  rec(rec, 0);
  return within_cap;
}

RowMatrix to_rows(const std::vector<double>& flat, int dim) {
  const Eigen::Index rows = dim == 0 ? 0 : static_cast<Eigen::Index>(flat.size() / dim);
  RowMatrix m(rows, dim);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

}  // namespace

const char* kind_name(PolytopeKind kind) {
  switch (kind) {
    case PolytopeKind::Permutahedron:
      return "permutahedron";
    case PolytopeKind::DagPaths:
      return "dag_paths";
    case PolytopeKind::VspFlow:
      return "vsp_flow";
    case PolytopeKind::Explicit:
      return "explicit";
  }
  return "unknown";
}

void SolutionPolytope::set_vertices(RowMatrix v) {
  vertices_ = std::move(v);
  enumerable_ = true;
  index_.clear();
  index_.reserve(static_cast<std::size_t>(vertices_.rows()));
  for (Eigen::Index i = 0; i < vertices_.rows(); ++i) {
    const auto [it, inserted] =
        index_.emplace(vertex_key(vertices_.row(i).data(), dim_), static_cast<std::size_t>(i));
    if (!inserted) throw InvalidArgument("duplicate vertex in solution set");
  }
}

SolutionPolytope SolutionPolytope::permutahedron(int n) {
  if (n < 1) throw InvalidArgument("permutahedron needs n >= 1");
  SolutionPolytope p;
  p.kind_ = PolytopeKind::Permutahedron;
  p.dim_ = n;
  p.perm_n_ = n;
  std::vector<double> flat;
  if (enumerate_permutations(n, flat)) p.set_vertices(to_rows(flat, n));
  return p;
}

SolutionPolytope SolutionPolytope::dag_paths(Dag dag) {
  if (dag.arcs.empty()) throw InvalidArgument("path polytope needs at least one arc");
  for (const auto& [u, v] : dag.arcs) {
    if (u < 0 || v < 0 || u >= dag.n_nodes || v >= dag.n_nodes) {
      throw InvalidArgument("arc endpoint out of range");
    }
  }
  detail::topological_order(dag);  // rejects cycles
  SolutionPolytope p;
  p.kind_ = PolytopeKind::DagPaths;
  p.dim_ = static_cast<int>(dag.arcs.size());
  p.dag_ = std::move(dag);
  std::vector<double> flat;
  if (enumerate_paths(p.dag_, flat)) {
    if (flat.empty()) throw InvalidArgument("no path from source to sink");
    p.set_vertices(to_rows(flat, p.dim_));
  }
  return p;
}

SolutionPolytope SolutionPolytope::vsp_flow(VspNetwork net) {
  if (net.n_tasks < 1) throw InvalidArgument("vehicle network needs at least one task");
  Dag check;
  check.n_nodes = net.n_tasks;
  for (const auto& [u, v] : net.compat) {
    if (u < 0 || v < 0 || u >= net.n_tasks || v >= net.n_tasks || u == v) {
      throw InvalidArgument("compatibility arc out of range");
    }
    check.arcs.emplace_back(u, v);
  }
  detail::topological_order(check);
  SolutionPolytope p;
  p.kind_ = PolytopeKind::VspFlow;
  p.dim_ = net.dimension();
  p.vsp_ = std::move(net);
  std::vector<double> flat;
  if (enumerate_partitions(p.vsp_, flat)) p.set_vertices(to_rows(flat, p.dim_));
  return p;
}

SolutionPolytope SolutionPolytope::explicit_set(RowMatrix vertices) {
  if (vertices.rows() == 0 || vertices.cols() == 0) {
    throw InvalidArgument("explicit solution set is empty");
  }
  if (static_cast<std::size_t>(vertices.rows()) > kEnumerationCap) {
    throw InvalidArgument("explicit solution set exceeds the enumeration cap");
  }
  if (!vertices.allFinite()) throw InvalidArgument("non-finite vertex coordinate");
  SolutionPolytope p;
  p.kind_ = PolytopeKind::Explicit;
  p.dim_ = static_cast<int>(vertices.cols());
  p.set_vertices(std::move(vertices));
  return p;
}

std::string SolutionPolytope::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case PolytopeKind::Permutahedron:
      os << "Permutahedron(" << perm_n_ << ")";
      break;
    case PolytopeKind::DagPaths:
      os << "DagPaths(nodes=" << dag_.n_nodes << ", arcs=" << dag_.arcs.size() << ")";
      break;
    case PolytopeKind::VspFlow:
      os << "VspFlow(tasks=" << vsp_.n_tasks << ", compat=" << vsp_.compat.size() << ")";
      break;
    case PolytopeKind::Explicit:
      os << "Explicit(" << vertices_.rows() << " x " << dim_ << ")";
      break;
  }
  return os.str();
}

std::size_t SolutionPolytope::vertex_count() const {
  if (!enumerable_) throw EnumerationUnavailable(describe() + ": vertex set exceeds the cap");
  return static_cast<std::size_t>(vertices_.rows());
}

const RowMatrix& SolutionPolytope::vertices() const {
  if (!enumerable_) throw EnumerationUnavailable(describe() + ": vertex set exceeds the cap");
  return vertices_;
}

Vector SolutionPolytope::vertex(std::size_t i) const {
  return vertices().row(static_cast<Eigen::Index>(i)).transpose();
}

std::optional<std::size_t> SolutionPolytope::index_of(const Vector& y) const {
  if (!enumerable_) throw EnumerationUnavailable(describe() + ": vertex set exceeds the cap");
  if (y.size() != dim_) return std::nullopt;
  const auto it = index_.find(vertex_key(y.data(), dim_));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace perturbopt
