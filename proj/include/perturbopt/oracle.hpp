#pragma once

// Linear maximization oracles over the solution polytopes used by the
// problem domains, plus exact normal-cone geometry for polytopes small
// enough to enumerate.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "perturbopt/common.hpp"
#include "perturbopt/rng.hpp"

namespace perturbopt {

enum class PolytopeKind { Permutahedron, DagPaths, VspFlow, Explicit };

const char* kind_name(PolytopeKind kind);

/// Directed graph whose s-t paths are the solutions. Coordinates of a
/// solution are arc indicators in `arcs` order.
struct Dag {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> arcs;
  int source = 0;
  int sink = 0;
};

/// Path-partition network of a vehicle scheduling instance: every task is
/// covered by exactly one vehicle path from the depot o to the depot d.
/// Coordinate layout: T arcs o->v, then the compatibility arcs, then T arcs
/// v->d.
struct VspNetwork {
  int n_tasks = 0;
  std::vector<std::pair<int, int>> compat;

  int source_arc(int v) const { return v; }
  int compat_arc(std::size_t e) const { return n_tasks + static_cast<int>(e); }
  int sink_arc(int v) const { return n_tasks + static_cast<int>(compat.size()) + v; }
  int dimension() const { return 2 * n_tasks + static_cast<int>(compat.size()); }
};

class SolutionPolytope {
 public:
  /// Vertices are the n! permutations of (1, ..., n).
  static SolutionPolytope permutahedron(int n);
  static SolutionPolytope dag_paths(Dag dag);
  static SolutionPolytope vsp_flow(VspNetwork net);
  /// Finite vertex set given row by row; the oracle is brute force.
  static SolutionPolytope explicit_set(RowMatrix vertices);

  PolytopeKind kind() const { return kind_; }
  int dimension() const { return dim_; }
  std::string describe() const;

  /// True when the vertex list is materialized (|Y| within the cap).
  bool enumerable() const { return enumerable_; }
  std::size_t vertex_count() const;
  const RowMatrix& vertices() const;
  Vector vertex(std::size_t i) const;
  std::optional<std::size_t> index_of(const Vector& y) const;

  int permutation_size() const { return perm_n_; }
  const Dag& dag() const { return dag_; }
  const VspNetwork& vsp() const { return vsp_; }

 private:
  SolutionPolytope() = default;
  void set_vertices(RowMatrix v);

  PolytopeKind kind_ = PolytopeKind::Explicit;
  int dim_ = 0;
  int perm_n_ = 0;
  Dag dag_;
  VspNetwork vsp_;
  bool enumerable_ = false;
  RowMatrix vertices_;
  std::unordered_map<std::string, std::size_t> index_;
};

using PolytopePtr = std::shared_ptr<const SolutionPolytope>;

struct OracleResult {
  Vector y;
  double value = 0.0;
  bool tie = false;  ///< another vertex is within kTieTolerance of the max
};

/// argmax_y <y, theta>. Sorting for the permutahedron, longest-path DP for
/// DAG paths, successive shortest paths for the vehicle network.
OracleResult linear_oracle(const SolutionPolytope& poly, const Vector& theta);

struct EnumeratedArgmax {
  std::size_t index = 0;
  double value = 0.0;
  bool tie = false;
};

/// Scores every enumerated vertex. First index wins among exact ties.
EnumeratedArgmax brute_force_oracle(const SolutionPolytope& poly, const Vector& theta);

/// Distance from theta to the boundary of its normal cone; 0 on ties.
double internal_radius(const SolutionPolytope& poly, const Vector& theta);

struct PolicyAtom {
  std::size_t index = 0;
  Vector y;
  double probability = 0.0;
  double std_error = 0.0;
};

struct SurrogatePolicyMeasure {
  std::vector<PolicyAtom> support;
  bool is_dirac = false;
};

/// Default sample budget and radius factor for splitting ties in p0.
inline constexpr std::size_t kP0Samples = 100'000;
inline constexpr double kP0RadiusFactor = 1e-9;

/// Unperturbed surrogate policy. A Dirac at the oracle output when rho > 0;
/// otherwise cone proportions estimated from a tiny uniform ball around theta.
SurrogatePolicyMeasure p0(const SolutionPolytope& poly, const Vector& theta, Stream& stream,
                          std::size_t samples = kP0Samples);

struct NormalCone {
  std::size_t index = 0;
  Vector vertex;
  /// Rows (y - y') / ||y - y'|| for every other vertex y'. The cone is
  /// {theta : normals * theta >= 0}.
  RowMatrix normals;
};

std::vector<NormalCone> enumerate_normal_fan(const SolutionPolytope& poly);

/// Rank of the centered vertex set. Equal to the dimension only for
/// full-dimensional sets; permutahedra and path polytopes are not.
int centered_rank(const SolutionPolytope& poly);

}  // namespace perturbopt
