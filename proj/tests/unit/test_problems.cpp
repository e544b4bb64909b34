#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "perturbopt/problems.hpp"

using namespace perturbopt;
using testing::vec;

namespace {

double min_cost(const CostOracle& o, const Instance& x) {
  double best = 1e300;
  for (std::size_t i = 0; i < x.polytope->vertex_count(); ++i) {
    best = std::min(best, eval_cost(o, x.polytope->vertex(i), x));
  }
  return best;
}

// Flow vector for a partition of tasks into the given chains.
Vector chains_to_flow(const VspNetwork& net, const std::vector<std::vector<int>>& chains) {
  Vector y = Vector::Zero(net.dimension());
  for (const auto& chain : chains) {
    y[net.source_arc(chain.front())] = 1.0;
    y[net.sink_arc(chain.back())] = 1.0;
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
      for (std::size_t e = 0; e < net.compat.size(); ++e) {
        if (net.compat[e] == std::make_pair(chain[k], chain[k + 1])) y[net.compat_arc(e)] = 1.0;
      }
    }
  }
  return y;
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("completion time of two jobs") {
  DomainSpec spec;
  spec.release_max = 1.0;
  spec.processing_max = 2.0;
  const auto x = make_scheduling_instance(vec({0, 0}), vec({1, 2}), spec);
  const auto o = make_cost_oracle(spec);
  CHECK(eval_cost(o, vec({2, 1}), x) == 4.0);  // job 1 first
  CHECK(eval_cost(o, vec({1, 2}), x) == 5.0);
  CHECK(osc_bound(o, x) == 1.0);
  CHECK_THROWS_AS(eval_cost(o, vec({1, 1}), x), InvalidArgument);
  CHECK_THROWS_AS(eval_cost(o, vec({1, 2, 3}), x), DimensionError);
}

TEST_CASE("release dates delay the start") {
  DomainSpec spec;
  spec.release_max = 5.0;
  spec.processing_max = 3.0;
  const auto x = make_scheduling_instance(vec({3, 0}), vec({1, 2}), spec);
  const auto o = make_cost_oracle(spec);
  CHECK(eval_cost(o, vec({2, 1}), x) == 4.0 + 6.0);  // idle until 3
  CHECK(eval_cost(o, vec({1, 2}), x) == 2.0 + 4.0);
}

TEST_CASE("vehicle costs") {
  DomainSpec spec;
  spec.domain = Domain::StoVsp;
  spec.c_delay = 1.0;
  spec.c_vehicle = 10.0;
  const auto net = vsp_network(3, 2);
  RowMatrix zero = RowMatrix::Zero(1, 3);
  const auto x = make_vsp_instance(net, Vector::Ones(3), Vector::Ones(3), zero, spec);
  auto o = make_cost_oracle(spec);
  CHECK(eval_cost(o, chains_to_flow(net, {{0}, {1}, {2}}), x) == 30.0);
  CHECK(eval_cost(o, chains_to_flow(net, {{0, 1, 2}}), x) == 10.0);
  CHECK(osc_bound(o, x) == 20.0);

  spec.c_vehicle = 0.0;
  o = make_cost_oracle(spec);
  const auto chain = vsp_network(2, 1);
  RowMatrix sc(1, 2);
  sc << 2.0, 0.0;
  const auto y = make_vsp_instance(chain, vec({1.0}), Vector::Ones(2), sc, spec);
  CHECK(eval_cost(o, chains_to_flow(chain, {{0, 1}}), y) == 3.0);
  CHECK(eval_cost(o, chains_to_flow(chain, {{0}, {1}}), y) == 2.0);

  Vector bad = chains_to_flow(net, {{0, 1, 2}});
  bad[net.source_arc(1)] = 1.0;
  CHECK_THROWS_AS(eval_cost(o, bad, x), InvalidArgument);
}

TEST_CASE("vehicle cost is monotone in every intrinsic delay") {
  DomainSpec spec;
  spec.domain = Domain::StoVsp;
  spec.sizes = {5};
  spec.n_scenarios = 3;
  const auto xs = generate_instances(spec, 5, 17);
  const auto o = make_cost_oracle(spec);
  Stream rng(1);
  for (const auto& x : xs) {
    for (int trial = 0; trial < 20; ++trial) {
      Instance bumped = x;
      const auto s = static_cast<Eigen::Index>(rng.index(3));
      const auto v = static_cast<Eigen::Index>(rng.index(5));
      bumped.vsp.scenarios(s, v) += rng.uniform(0.0, 2.0);
      for (std::size_t i = 0; i < x.polytope->vertex_count(); ++i) {
        const Vector y = x.polytope->vertex(i);
        CHECK(eval_cost(o, y, bumped) >= eval_cost(o, y, x));
      }
    }
  }
}

TEST_CASE("contextual cost") {
  const auto x = make_contextual_instance(0.5, -0.5, 0.2);
  CostOracle o;
  o.kind = CostKind::Contextual;
  CHECK(x.contextual.xi == doctest::Approx(1 + 0.4 + 0.2 + 0.1));
  CHECK(eval_cost(o, vec({1}), x) == 1.0);
  CHECK(eval_cost(o, vec({0}), x) == x.contextual.xi);
  // xi = 1 makes both decisions cost the same.
  CHECK(osc_bound(o, make_contextual_instance(0.0, 0.0, 0.0)) == 0.0);
  DomainSpec spec;
  spec.domain = Domain::Contextual;
  CHECK(declared_bounds(spec, 1).lower == doctest::Approx(-0.7));
  CHECK(declared_bounds(spec, 1).upper == doctest::Approx(2.7));
}

TEST_CASE("generation is deterministic") {
  for (Domain d : {Domain::Scheduling, Domain::StoVsp, Domain::Contextual}) {
    DomainSpec spec;
    spec.domain = d;
    spec.sizes = {4};
    spec.n_scenarios = 5;
    const auto a = generate_instances(spec, 5, 7);
    const auto b = generate_instances(spec, 5, 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(to_json(a[i]).dump() == to_json(b[i]).dump());
    const auto c = generate_instances(spec, 5, 8);
    CHECK(to_json(a[0]).dump() != to_json(c[0]).dump());
  }
}

TEST_CASE("partition cells share polytope and dimension") {
  DomainSpec spec;
  spec.domain = Domain::StoVsp;
  spec.sizes = {5};
  const auto xs = generate_instances(spec, 3, 1);
  for (const auto& x : xs) {
    CHECK(x.polytope->kind() == PolytopeKind::VspFlow);
    CHECK(x.dimension() == xs[0].dimension());
    CHECK(x.features.rows() == x.dimension());
    CHECK(x.features.cols() == spec.feature_dimension());
  }
}

TEST_CASE("partition cells are drawn uniformly") {
  DomainSpec spec;
  spec.sizes = {3, 4};
  const auto xs = generate_instances(spec, 10000, 3);
  const auto threes = std::count_if(xs.begin(), xs.end(), [](const Instance& x) { return x.partition == 3; });
  CHECK(double(threes) / 10000.0 == doctest::Approx(0.5).epsilon(0.04));
  for (const auto& x : xs) CHECK(x.dimension() == x.partition);
}

TEST_CASE("costs stay inside the declared bounds") {
  for (Domain d : {Domain::Scheduling, Domain::StoVsp, Domain::Contextual}) {
    DomainSpec spec;
    spec.domain = d;
    spec.sizes = {3, 4};
    spec.n_scenarios = 10;
    const auto o = make_cost_oracle(spec);
    for (const auto& x : generate_instances(spec, 40, 21)) {
      const CostBounds b = o.bounds.at(x.partition);
      for (std::size_t i = 0; i < x.polytope->vertex_count(); ++i) {
        const double f = eval_cost(o, x.polytope->vertex(i), x);
        CHECK(f >= b.lower);
        CHECK(f <= b.upper);
      }
    }
    for (int cell : spec.sizes) {
      if (d != Domain::Contextual) CHECK(osc_bound(spec, cell) == o.bounds.at(cell).osc());
    }
  }
}

TEST_CASE("relabeling identical jobs keeps the optimal cost") {
  DomainSpec spec;
  const auto a = make_scheduling_instance(vec({0.2, 0.2, 0.0, 0.5}), vec({0.3, 0.3, 0.9, 0.1}), spec);
  const auto b = make_scheduling_instance(vec({0.0, 0.2, 0.5, 0.2}), vec({0.9, 0.3, 0.1, 0.3}), spec);
  const auto o = make_cost_oracle(spec);
  CHECK(min_cost(o, a) == doctest::Approx(min_cost(o, b)));
}

TEST_CASE("instance documents round-trip") {
  for (Domain d : {Domain::Scheduling, Domain::StoVsp, Domain::Contextual}) {
    DomainSpec spec;
    spec.domain = d;
    spec.sizes = {3};
    spec.n_scenarios = 4;
    spec.rank_features = true;
    for (const auto& x : generate_instances(spec, 3, 5)) {
      const auto doc = to_json(x);
      CHECK(doc["format"] == "perturbopt.instance");
      const Instance back = instance_from_json(doc);
      CHECK(to_json(back).dump() == doc.dump());
    }
  }
  Dag dag;
  dag.n_nodes = 3;
  dag.source = 0;
  dag.sink = 2;
  dag.arcs = {{0, 1}, {1, 2}, {0, 2}};
  const auto poly = SolutionPolytope::dag_paths(dag);
  CHECK(polytope_to_json(polytope_from_json(polytope_to_json(poly))) == polytope_to_json(poly));
  CHECK_THROWS_AS(instance_from_json(nlohmann::json{{"format", "other"}}), InvalidArgument);
}

TEST_CASE("invalid generation parameters") {
  DomainSpec spec;
  CHECK_THROWS_AS(generate_instances(spec, 0, 1), InvalidArgument);
  spec.sizes = {};
  CHECK_THROWS_AS(generate_instances(spec, 1, 1), InvalidArgument);
  spec.sizes = {0};
  CHECK_THROWS_AS(generate_instances(spec, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(parse_domain("routing"), InvalidArgument);
}

}  // TEST_SUITE
