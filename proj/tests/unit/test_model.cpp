#include <doctest.h>

#include "helpers.hpp"
#include "perturbopt/model.hpp"

using namespace perturbopt;
using testing::vec;

namespace {

Instance with_features(Matrix phi) {
  Instance x;
  x.polytope = std::make_shared<SolutionPolytope>(SolutionPolytope::permutahedron(int(phi.rows())));
  x.partition = int(phi.rows());
  x.features = std::move(phi);
  return x;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("predict examples") {
  const GeneralizedLinearModel model(ParamSpace::box(3, -5, 5), 1.0);
  const auto x = with_features(Matrix::Identity(3, 3));
  CHECK(model.predict(vec({1, 2, 3}), x) == vec({1, 2, 3}));
  CHECK(model.predict(Vector::Zero(3), x) == Vector::Zero(3));
  CHECK_THROWS_AS(model.predict(vec({6, 0, 0}), x), InvalidArgument);
  CHECK_THROWS_AS(model.predict(vec({1, 0}), x), DimensionError);
}

TEST_CASE("shortest processing time from w = (0, -1)") {
  DomainSpec spec;
  const auto model = GeneralizedLinearModel::for_domain(spec, ParamSpace::box(2));
  const auto x = make_scheduling_instance(vec({0.1, 0.9, 0.4, 0.0}), vec({0.7, 0.2, 0.9, 0.4}), spec);
  const Vector theta = model.predict(vec({0, -1}), x);
  const auto order = schedule_order(linear_oracle(*x.polytope, theta).y);
  CHECK(order == std::vector<int>{1, 3, 0, 2});
}

TEST_CASE("predict is linear") {
  const GeneralizedLinearModel model(ParamSpace::box(2), 2.0);
  Matrix phi(3, 2);
  phi << 0.25, -0.5, 1.0, 0.75, -0.125, 0.0;
  const auto x = with_features(phi);
  const Vector w1 = vec({0.25, -0.5}), w2 = vec({0.5, 0.125});
  CHECK(model.predict(w1 + w2, x) == model.predict(w1, x) + model.predict(w2, x) - model.predict(Vector::Zero(2), x));
  Stream rng(4);
  for (int t = 0; t < 100; ++t) {
    const Vector a = 0.5 * model.space().sample(rng), b = 0.5 * model.space().sample(rng);
    const Vector diff = model.predict(a + b, x) - model.predict(a, x) - model.predict(b, x);
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("Lipschitz audit") {
  Stream rng(6);
  const GeneralizedLinearModel model(ParamSpace::box(3), 3.0);
  std::vector<Instance> id = {with_features(Matrix::Identity(3, 3))};
  CHECK(lipschitz_audit(model, id, 50, rng) == doctest::Approx(1.0));
  std::vector<Instance> scaled = {with_features(3.0 * Matrix::Identity(3, 3))};
  CHECK(lipschitz_audit(model, scaled, 50, rng) == doctest::Approx(3.0));
  std::vector<Instance> zero = {with_features(Matrix::Zero(3, 3))};
  CHECK(lipschitz_audit(model, zero, 50, rng) == 0.0);
  CHECK_THROWS_AS(lipschitz_audit(model, zero, 1, rng), InvalidArgument);
}

TEST_CASE("declared bound holds on generated data") {
  Stream rng(12);
  for (Domain d : {Domain::Scheduling, Domain::StoVsp, Domain::Contextual}) {
    DomainSpec spec;
    spec.domain = d;
    spec.sizes = {3, 5};
    spec.n_scenarios = 2;
    spec.rank_features = true;
    const auto model = GeneralizedLinearModel::for_domain(spec, ParamSpace::box(spec.feature_dimension()));
    const auto xs = generate_instances(spec, 50, 2);
    CHECK_NOTHROW(model.verify(xs));
    CHECK(lipschitz_audit(model, xs, 20, rng) <= model.lipschitz_bound());
  }
}

TEST_CASE("parameter box") {
  CHECK_THROWS_AS(ParamSpace(vec({0, 0}), vec({1, 0})), InvalidArgument);
  CHECK_THROWS_AS(ParamSpace(vec({0}), vec({INFINITY})), InvalidArgument);
  const auto box = ParamSpace::box(2);
  CHECK(box.diameter() == doctest::Approx(std::sqrt(8.0)));
  CHECK(box.enclosing_radius() == doctest::Approx(std::sqrt(2.0)));
  CHECK(box.project(vec({3, -0.5})) == vec({1, -0.5}));
  CHECK(box.contains(vec({1, -1})));
  CHECK_FALSE(box.contains(vec({1.0001, 0})));
}

}  // TEST_SUITE
