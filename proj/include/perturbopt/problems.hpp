#pragma once

// Problem domains: single machine scheduling, stochastic vehicle scheduling
// and a one-dimensional contextual decision. Each supplies instances with a
// feature matrix, a solution polytope and a black-box cost.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "perturbopt/common.hpp"
#include "perturbopt/oracle.hpp"

namespace perturbopt {

enum class Domain { Scheduling, StoVsp, Contextual };

const char* domain_name(Domain d);
Domain parse_domain(std::string_view name);

struct SchedulingData {
  Vector release;
  Vector processing;
};

struct VspData {
  Vector slack;            ///< one entry per compatibility arc
  Vector delay_scale;      ///< one entry per task
  RowMatrix scenarios;     ///< n_scenarios x n_tasks intrinsic delays
};

struct ContextualData {
  Vector context;  ///< observed part (u1, u2)
  double noise = 0.0;  ///< unobserved uniform component
  double xi = 0.0;     ///< realized cost of the outside option
};

struct Instance {
  std::uint64_t id = 0;
  Domain domain = Domain::Scheduling;
  int partition = 0;  ///< job count, task count, or 1 for the contextual domain
  PolytopePtr polytope;
  Matrix features;  ///< d(G) x d, rows follow solution coordinates
  std::uint64_t scenario_seed = 0;
  SchedulingData scheduling;
  VspData vsp;
  ContextualData contextual;

  int dimension() const { return polytope->dimension(); }
};

/// Generation parameters for one domain. `sizes` lists the partition cells
/// (job or task counts); each instance draws its cell uniformly.
struct DomainSpec {
  Domain domain = Domain::Scheduling;
  std::vector<int> sizes{4};

  // Scheduling: r ~ U[0, release_max], p ~ U[processing_min, processing_max].
  double release_max = 1.0;
  double processing_min = 0.1;
  double processing_max = 1.0;
  bool rank_features = false;

  // Vehicle scheduling: task u may precede v when 0 < v - u <= window.
  int window = 2;
  double slack_max = 1.0;  ///< per unit of index distance
  double delay_scale_min = 0.5;
  double delay_scale_max = 1.5;
  double delay_cap = 6.0;  ///< intrinsic delays are scale * min(Exp(1), cap)
  int n_scenarios = 100;
  double c_delay = 1.0;
  double c_vehicle = 2.0;

  // Contextual: y = 1 pays take_cost, y = 0 pays the random xi.
  double take_cost = 1.0;

  int feature_dimension() const;
};

enum class CostKind { SchedulingCompletionTime, StoVspDelayCost, Contextual };

struct CostBounds {
  double lower = 0.0;
  double upper = 0.0;
  double osc() const { return upper - lower; }
};

struct CostOracle {
  CostKind kind = CostKind::SchedulingCompletionTime;
  double c_delay = 1.0;
  double c_vehicle = 2.0;
  double take_cost = 1.0;
  std::map<int, CostBounds> bounds;  ///< declared per partition cell
};

CostOracle make_cost_oracle(const DomainSpec& spec);

/// f0(y, x). Throws InvalidArgument for an infeasible y.
double eval_cost(const CostOracle& oracle, const Vector& y, const Instance& x);

/// Start order of the jobs encoded by a permutation vertex: larger entries
/// run first.
std::vector<int> schedule_order(const Vector& y);

std::vector<Instance> generate_instances(const DomainSpec& spec, std::size_t count,
                                         std::uint64_t seed);

/// Analytic range of f0 over a partition cell of the declared feature box.
CostBounds declared_bounds(const DomainSpec& spec, int partition);

/// Exact oscillation over all solutions of one instance.
double osc_bound(const CostOracle& oracle, const Instance& x);
/// Exact oscillation over all (solution, instance) pairs of a sample.
double osc_bound(const CostOracle& oracle, const std::vector<Instance>& xs);
/// Analytic bound for a partition cell (sup of the upper corner minus inf
/// of the lower corner).
double osc_bound(const DomainSpec& spec, int partition);

// Instance builders (features included) shared by the generator and tests.
Instance make_scheduling_instance(const Vector& release, const Vector& processing,
                                  const DomainSpec& spec, PolytopePtr polytope = nullptr);
VspNetwork vsp_network(int n_tasks, int window);
Instance make_vsp_instance(const VspNetwork& net, const Vector& slack, const Vector& delay_scale,
                           const RowMatrix& scenarios, const DomainSpec& spec,
                           PolytopePtr polytope = nullptr);
Instance make_contextual_instance(double u1, double u2, double noise,
                                  PolytopePtr polytope = nullptr);
PolytopePtr contextual_polytope();

/// Outside-option cost of the contextual domain given its context and noise.
double contextual_xi(double u1, double u2, double noise);

// Versioned JSON documents.
inline constexpr int kInstanceFormatVersion = 1;
nlohmann::json to_json(const Instance& x);
Instance instance_from_json(const nlohmann::json& doc);
nlohmann::json polytope_to_json(const SolutionPolytope& poly);
SolutionPolytope polytope_from_json(const nlohmann::json& doc);

}  // namespace perturbopt
