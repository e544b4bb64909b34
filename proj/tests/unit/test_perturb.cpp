#include <doctest.h>

#include <cstring>

#include "helpers.hpp"
#include "perturbopt/parallel.hpp"
#include "perturbopt/perturb.hpp"

using namespace perturbopt;
using testing::normal_cdf;
using testing::vec;

namespace {

// Contextual instance with theta = u1 under w = (1, 0).
Instance contextual_at(double u1, double xi, std::uint64_t id = 0) {
  Instance x = make_contextual_instance(u1, 0.0, 0.0);
  x.contextual.xi = xi;
  x.id = id;
  return x;
}

GeneralizedLinearModel contextual_model() {
  return GeneralizedLinearModel(ParamSpace::box(2), std::sqrt(2.0));
}

}  // namespace

TEST_SUITE("perturb") {

TEST_CASE("perturbation law") {
  for (int d : {1, 4}) {
    const std::size_t n = 100000;
    double sq = 0.0;
    Vector mean = Vector::Zero(d);
    for (std::size_t k = 0; k < n; ++k) {
      Stream s = perturbation_stream(1, 0, k);
      const Vector z = sample_perturbation(d, s);
      sq += z.squaredNorm();
      mean += z;
    }
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
    mean /= double(n);
    // Each coordinate has standard deviation 1/sqrt(d n).
    CHECK(mean.cwiseAbs().maxCoeff() <= 3.0 / std::sqrt(double(d) * n) * 1.5);
  }
  Stream s(1);
  CHECK_THROWS_AS(sample_perturbation(0, s), InvalidArgument);
}

TEST_CASE("p_lambda matches the normal cdf in one dimension") {
  const auto x = contextual_at(0.3, 5.0);
  PerturbationSpec spec;
  spec.lambda = 1.0;
  spec.mc_samples = 8192;
  spec.master_seed = 3;
  const auto est = p_lambda(*x.polytope, vec({0.3}), vec({1}), spec);
  CHECK(normal_cdf(0.3) == doctest::Approx(0.6179114222));
  CHECK(std::abs(est.value - normal_cdf(0.3)) <= 3 * est.std_error);
  const auto closed = p_lambda_closed_form(*x.polytope, vec({0.3}), 1.0);
  REQUIRE(closed.has_value());
  CHECK((*closed)[1] == doctest::Approx(normal_cdf(0.3)).epsilon(1e-14));
  spec.lambda = 0.0;
  spec.epsilon0 = 0.0;
  CHECK_THROWS_AS(p_lambda(*x.polytope, vec({0.3}), vec({1}), spec), InvalidArgument);
}

TEST_CASE("p_lambda distribution sums to one") {
  const auto p = SolutionPolytope::permutahedron(3);
  Vector se;
  const Vector dist = p_lambda_distribution(p, vec({0.1, -0.2, 0.3}), 0.5, 4096, 1, 0, &se);
  CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((se.array() >= 0.0).all());
}

TEST_CASE("symmetric solutions split evenly at zero") {
  const auto p = SolutionPolytope::permutahedron(2);
  const auto closed = p_lambda_closed_form(p, Vector::Zero(2), 0.7);
  REQUIRE(closed.has_value());
  CHECK((*closed)[0] == 0.5);
  PerturbationSpec spec;
  spec.lambda = 0.7;
  spec.mc_samples = 8192;
  const auto est = p_lambda(p, Vector::Zero(2), vec({1, 2}), spec);
  CHECK(std::abs(est.value - 0.5) <= 3 * est.std_error);
  // Two jobs: p(order (2,1)) = Phi((theta1 - theta2) / lambda).
  const auto c2 = p_lambda_closed_form(p, vec({0.4, 0.1}), 0.5);
  CHECK((*c2)[1] == doctest::Approx(normal_cdf(0.3 / 0.5)));
  Vector se;
  const Vector mc = p_lambda_distribution(p, vec({0.4, 0.1}), 0.5, 8192, 9, 0, &se);
  CHECK(std::abs(mc[1] - (*c2)[1]) <= 3 * se[1]);
}

TEST_CASE("regularized risk mixture") {
  const auto model = contextual_model();
  DomainSpec spec_d;
  spec_d.domain = Domain::Contextual;
  spec_d.take_cost = 2.0;
  const auto oracle = make_cost_oracle(spec_d);
  std::vector<Instance> xs = {contextual_at(0.3, 5.0)};
  PerturbationSpec spec;
  spec.lambda = 1.0;
  spec.mc_samples = 8192;
  spec.master_seed = 17;
  const double expected = 5.0 - 3.0 * normal_cdf(0.3);
  CHECK(expected == doctest::Approx(3.14627).epsilon(1e-5));
  const auto exact = regularized_risk(model, vec({1, 0}), xs, oracle, spec, RiskMode::ExactEnum);
  CHECK(exact.exact);
  CHECK(exact.value == doctest::Approx(expected).epsilon(1e-14));
  const auto mc = regularized_risk(model, vec({1, 0}), xs, oracle, spec, RiskMode::MonteCarlo);
  CHECK(std::abs(mc.value - expected) <= 3 * mc.mc_std_error);
  CHECK(mc.K == 8192);
}

TEST_CASE("small lambda recovers the unperturbed cost") {
  const auto model = contextual_model();
  DomainSpec spec_d;
  spec_d.domain = Domain::Contextual;
  const auto oracle = make_cost_oracle(spec_d);
  std::vector<Instance> xs = {contextual_at(0.3, 2.5), contextual_at(-0.4, 0.2, 1)};
  PerturbationSpec spec;
  spec.lambda = 1e-6;
  spec.epsilon0 = 0.0;
  spec.mc_samples = 512;
  const auto r = regularized_risk(model, vec({1, 0}), xs, oracle, spec);
  CHECK(r.value == doctest::Approx((1.0 + 0.2) / 2));
  spec.lambda = 0.0;
  CHECK(regularized_risk(model, vec({1, 0}), xs, oracle, spec).value == doctest::Approx(0.6));
}

TEST_CASE("constant cost gives a constant risk") {
  const auto model = contextual_model();
  DomainSpec spec_d;
  spec_d.domain = Domain::Contextual;
  const auto oracle = make_cost_oracle(spec_d);
  std::vector<Instance> xs = {contextual_at(0.3, 1.0), contextual_at(-0.2, 1.0, 1)};
  PerturbationSpec spec;
  Stream rng(3);
  for (int t = 0; t < 10; ++t) {
    spec.lambda = rng.uniform(0.01, 2.0);
    const Vector w = model.space().sample(rng);
    CHECK(regularized_risk(model, w, xs, oracle, spec).value == 1.0);
    CHECK(regularized_risk(model, w, xs, oracle, spec, RiskMode::ExactEnum).value == 1.0);
  }
}

TEST_CASE("tie at zero lambda uses the p0 measure") {
  const auto model = contextual_model();
  DomainSpec spec_d;
  spec_d.domain = Domain::Contextual;
  const auto oracle = make_cost_oracle(spec_d);
  std::vector<Instance> xs = {contextual_at(0.0, 2.0)};
  PerturbationSpec spec;
  spec.lambda = 0.0;
  spec.epsilon0 = 0.0;
  const auto r = regularized_risk(model, vec({1, 0}), xs, oracle, spec);
  CHECK(r.ties == 1);
  CHECK(std::abs(r.value - 1.5) <= 3 * r.mc_std_error + 1e-12);
}

TEST_CASE("risk is bit-identical across calls and thread counts") {
  DomainSpec spec_d;
  spec_d.sizes = {4};
  const auto xs = generate_instances(spec_d, 30, 5);
  const auto model = GeneralizedLinearModel::for_domain(spec_d, ParamSpace::box(2));
  const auto oracle = make_cost_oracle(spec_d);
  PerturbationSpec spec;
  spec.lambda = 0.2;
  spec.mc_samples = 256;
  spec.master_seed = 77;
  const Vector w = vec({0.3, -0.8});
  const unsigned saved = thread_count();
  std::vector<double> values;
  for (unsigned t : {1u, 4u, 8u}) {
    set_thread_count(t);
    RiskSurface surface(model, xs, oracle, spec);
    values.push_back(surface(w));
    values.push_back(surface(w));
  }
  set_thread_count(saved);
  for (double v : values) CHECK(std::memcmp(&v, &values[0], sizeof v) == 0);
}

TEST_CASE("risk reports stay in the declared cost range") {
  DomainSpec spec_d;
  spec_d.sizes = {3, 4};
  const auto xs = generate_instances(spec_d, 20, 8);
  const auto model = GeneralizedLinearModel::for_domain(spec_d, ParamSpace::box(2));
  const auto oracle = make_cost_oracle(spec_d);
  PerturbationSpec spec;
  spec.mc_samples = 64;
  Stream rng(1);
  const double lo = oracle.bounds.at(3).lower, hi = oracle.bounds.at(4).upper;
  for (int t = 0; t < 10; ++t) {
    spec.lambda = rng.uniform(0.0, 1.0);
    spec.epsilon0 = 0.0;
    const auto r = regularized_risk(model, model.space().sample(rng), xs, oracle, spec);
    CHECK(r.value >= lo);
    CHECK(r.value <= hi);
    CHECK(r.mc_std_error >= 0.0);
  }
}

TEST_CASE("tail mass examples") {
  const auto model = contextual_model();
  std::vector<Instance> xs = {contextual_at(0.7, 1.0)};
  PerturbationSpec spec;
  spec.lambda = 0.35;
  CHECK(tail_mass_V(model, vec({1, 0}), xs, spec) ==
        doctest::Approx(2 * (1 - normal_cdf(2.0))).epsilon(1e-12));
  CHECK(2 * (1 - normal_cdf(2.0)) == doctest::Approx(0.04550).epsilon(1e-4));
  spec.lambda = 1e6;
  CHECK(tail_mass_V(model, vec({1, 0}), xs, spec) == doctest::Approx(1.0).epsilon(1e-5));
  spec.lambda = 1e-3;
  CHECK(tail_mass_V(model, vec({1, 0}), xs, spec) < 1e-12);
  std::vector<Instance> boundary = {contextual_at(0.0, 1.0)};
  for (double l : {0.01, 0.1, 1.0}) {
    spec.lambda = l;
    CHECK(tail_mass_V(model, vec({1, 0}), boundary, spec) == 1.0);
  }
  spec.lambda = 0.0;
  spec.epsilon0 = 0.0;
  CHECK_THROWS_AS(tail_mass_V(model, vec({1, 0}), xs, spec), InvalidArgument);
}

TEST_CASE("tail mass is nondecreasing in lambda") {
  DomainSpec spec_d;
  spec_d.sizes = {3, 4};
  const auto xs = generate_instances(spec_d, 30, 2);
  const auto model = GeneralizedLinearModel::for_domain(spec_d, ParamSpace::box(2));
  Stream rng(5);
  for (int t = 0; t < 10; ++t) {
    const Vector w = model.space().sample(rng);
    double prev = 0.0;
    for (double l = 0.001; l <= 2.0; l *= 1.5) {
      PerturbationSpec spec;
      spec.lambda = l;
      const double v = tail_mass_V(model, w, xs, spec);
      CHECK(v >= prev);
      CHECK(v <= 1.0);
      prev = v;
    }
  }
}

TEST_CASE("chi tail") {
  CHECK(chi_tail(1, 2.0) == doctest::Approx(2 * (1 - normal_cdf(2.0))));
  // d = 2: sqrt(2)||Z|| is Rayleigh, P(||Z|| > t) = exp(-t^2).
  CHECK(chi_tail(2, 0.8) == doctest::Approx(std::exp(-0.64)));
  CHECK(chi_tail(3, 0.0) == 1.0);
}

TEST_CASE("perturbation spec validation") {
  PerturbationSpec spec;
  spec.lambda = 1e-4;
  spec.epsilon0 = 1e-3;
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec.lambda = 0.1;
  spec.mc_samples = 0;
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
}

}  // TEST_SUITE
