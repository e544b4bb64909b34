#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "perturbopt/oracle.hpp"
#include "perturbopt/problems.hpp"

using namespace perturbopt;
using testing::vec;

namespace {

SolutionPolytope two_point() {
  RowMatrix v(2, 1);
  v << 0.0, 1.0;
  return SolutionPolytope::explicit_set(v);
}

SolutionPolytope three_arc_dag() {
  Dag dag;
  dag.n_nodes = 3;
  dag.source = 0;
  dag.sink = 2;
  dag.arcs = {{0, 1}, {1, 2}, {0, 2}};
  return SolutionPolytope::dag_paths(dag);
}

// Value of the best enumerated vertex, computed without the SIMD path.
double enumerated_max(const SolutionPolytope& poly, const Vector& theta) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < poly.vertices().rows(); ++i) {
    best = std::max(best, poly.vertices().row(i).dot(theta));
  }
  return best;
}

// Direction for which vertex i is the unique maximizer, when one exists.
Vector certificate_direction(const SolutionPolytope& poly, std::size_t i) {
  const Vector y = poly.vertex(i);
  if (poly.kind() == PolytopeKind::Permutahedron) return y;
  if (poly.kind() == PolytopeKind::Explicit) return y - poly.vertices().colwise().mean().transpose();
  return 2.0 * y - Vector::Ones(y.size());
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("permutahedron oracle sorts the direction") {
  const auto p = SolutionPolytope::permutahedron(3);
  const auto r = linear_oracle(p, vec({0.5, -1.2, 3.0}));
  CHECK(r.y == vec({2, 1, 3}));
  CHECK_FALSE(r.tie);
  CHECK(r.value == doctest::Approx(0.5 * 2 - 1.2 + 9.0));
  const auto bf = brute_force_oracle(p, vec({0.5, -1.2, 3.0}));
  CHECK(p.vertex(bf.index) == r.y);
}

TEST_CASE("zero direction is a full tie") {
  const auto p = SolutionPolytope::permutahedron(3);
  const auto r = linear_oracle(p, Vector::Zero(3));
  CHECK(r.tie);
  CHECK(p.index_of(r.y).has_value());
  CHECK(brute_force_oracle(p, Vector::Zero(3)).tie);
}

TEST_CASE("dag longest path picks the direct arc") {
  const auto p = three_arc_dag();
  const auto r = linear_oracle(p, vec({-1, -1, -1.5}));
  CHECK(r.y == vec({0, 0, 1}));
  CHECK_FALSE(r.tie);
  CHECK(r.value == doctest::Approx(-1.5));
  CHECK(p.vertex_count() == 2);
  CHECK(linear_oracle(p, vec({-1, -0.5, -1.5})).tie);
}

TEST_CASE("oracle input validation") {
  const auto p = SolutionPolytope::permutahedron(3);
  CHECK_THROWS_AS(linear_oracle(p, vec({1, 2})), DimensionError);
  CHECK_THROWS_AS(linear_oracle(p, vec({1, NAN, 2})), InvalidArgument);
  CHECK_THROWS_AS(linear_oracle(p, vec({1, INFINITY, 2})), InvalidArgument);
  Dag cyc;
  cyc.n_nodes = 3;
  cyc.source = 0;
  cyc.sink = 2;
  cyc.arcs = {{0, 1}, {1, 0}, {1, 2}};
  CHECK_THROWS_AS(SolutionPolytope::dag_paths(cyc), InvalidArgument);
}

TEST_CASE("permutahedron vertices are exactly the permutations") {
  for (int n = 1; n <= 5; ++n) {
    const auto p = SolutionPolytope::permutahedron(n);
    std::size_t fact = 1;
    for (int k = 2; k <= n; ++k) fact *= static_cast<std::size_t>(k);
    REQUIRE(p.vertex_count() == fact);
    for (std::size_t i = 0; i < fact; ++i) {
      Vector y = p.vertex(i);
      std::sort(y.data(), y.data() + y.size());
      for (int k = 0; k < n; ++k) CHECK(y[k] == k + 1);
    }
  }
}

TEST_CASE("enumeration cap") {
  CHECK(SolutionPolytope::permutahedron(7).enumerable());
  const auto big = SolutionPolytope::permutahedron(8);
  CHECK_FALSE(big.enumerable());
  CHECK_THROWS_AS(big.vertices(), EnumerationUnavailable);
  CHECK_THROWS_AS(internal_radius(big, Vector::LinSpaced(8, 0, 1)), EnumerationUnavailable);
  CHECK(linear_oracle(big, Vector::LinSpaced(8, 0, 1)).y == Vector::LinSpaced(8, 1, 8));
}

TEST_CASE("every enumerated vertex is extreme") {
  Stream rng(11);
  std::vector<SolutionPolytope> polys = {SolutionPolytope::permutahedron(4), three_arc_dag(),
                                         two_point(),
                                         SolutionPolytope::dag_paths(testing::random_dag(rng, 5, 9)),
                                         SolutionPolytope::vsp_flow(vsp_network(4, 2))};
  for (const auto& p : polys) {
    for (std::size_t i = 0; i < p.vertex_count(); ++i) {
      const auto r = brute_force_oracle(p, certificate_direction(p, i));
      CHECK(r.index == i);
      CHECK_FALSE(r.tie);
    }
  }
}

TEST_CASE("centered rank is a diagnostic, not full dimension") {
  CHECK(centered_rank(SolutionPolytope::permutahedron(4)) == 3);
  CHECK(centered_rank(two_point()) == 1);
  CHECK(centered_rank(three_arc_dag()) == 1);
}

TEST_CASE("oracle agrees with brute force on random directions") {
  Stream rng(2024);
  std::vector<SolutionPolytope> polys;
  for (int n = 2; n <= 6; ++n) polys.push_back(SolutionPolytope::permutahedron(n));
  for (int k = 0; k < 4; ++k) {
    polys.push_back(SolutionPolytope::dag_paths(testing::random_dag(rng, 4 + k, 10)));
  }
  for (int t = 2; t <= 5; ++t) polys.push_back(SolutionPolytope::vsp_flow(vsp_network(t, 2)));
  for (const auto& p : polys) {
    for (int trial = 0; trial < 1000; ++trial) {
      const Vector theta = testing::gaussian_vector(rng, p.dimension());
      const auto r = linear_oracle(p, theta);
      const double best = enumerated_max(p, theta);
      REQUIRE(p.index_of(r.y).has_value());
      CHECK(r.value == doctest::Approx(best).epsilon(1e-12));
      CHECK(r.tie == brute_force_oracle(p, theta).tie);
    }
  }
}

TEST_CASE("tie flag on integer directions matches brute force") {
  Stream rng(5);
  std::vector<SolutionPolytope> polys = {SolutionPolytope::permutahedron(4),
                                         SolutionPolytope::dag_paths(testing::random_dag(rng, 5, 9)),
                                         SolutionPolytope::vsp_flow(vsp_network(4, 2))};
  for (const auto& p : polys) {
    for (int trial = 0; trial < 300; ++trial) {
      Vector theta(p.dimension());
      for (int j = 0; j < p.dimension(); ++j) theta[j] = double(rng.index(3)) - 1.0;
      const auto r = linear_oracle(p, theta);
      const auto bf = brute_force_oracle(p, theta);
      CHECK(r.tie == bf.tie);
      CHECK(r.value == doctest::Approx(bf.value));
    }
  }
}

TEST_CASE("vehicle network oracle covers every task") {
  const auto p = SolutionPolytope::vsp_flow(vsp_network(5, 2));
  const auto& net = p.vsp();
  CHECK(p.dimension() == 2 * 5 + static_cast<int>(net.compat.size()));
  Stream rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = linear_oracle(p, testing::gaussian_vector(rng, p.dimension()));
    for (int v = 0; v < 5; ++v) {
      double in = r.y[net.source_arc(v)], out = r.y[net.sink_arc(v)];
      for (std::size_t e = 0; e < net.compat.size(); ++e) {
        if (net.compat[e].second == v) in += r.y[net.compat_arc(e)];
        if (net.compat[e].first == v) out += r.y[net.compat_arc(e)];
      }
      CHECK(in == 1.0);
      CHECK(out == 1.0);
    }
  }
}

TEST_CASE("internal radius examples") {
  CHECK(internal_radius(two_point(), vec({0.7})) == doctest::Approx(0.7));
  const auto p3 = SolutionPolytope::permutahedron(3);
  CHECK(internal_radius(p3, vec({1, 2, 4})) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(internal_radius(p3, vec({1, 1, 4})) == 0.0);
}

TEST_CASE("internal radius is the distance to the winning cone's halfspaces") {
  Stream rng(77);
  const auto p = SolutionPolytope::permutahedron(4);
  const auto fan = enumerate_normal_fan(p);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector theta = testing::gaussian_vector(rng, 4);
    const auto best = brute_force_oracle(p, theta);
    const Vector margins = fan[best.index].normals * theta;
    CHECK(margins.minCoeff() >= 0.0);
    CHECK(internal_radius(p, theta) == doctest::Approx(margins.minCoeff()).epsilon(1e-12));
  }
}

TEST_CASE("oracle output is stable inside the radius") {
  Stream rng(31);
  std::vector<SolutionPolytope> polys = {SolutionPolytope::permutahedron(4),
                                         SolutionPolytope::dag_paths(testing::random_dag(rng, 5, 8))};
  for (const auto& p : polys) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vector theta = testing::gaussian_vector(rng, p.dimension());
      const double rho = internal_radius(p, theta);
      const Vector y = linear_oracle(p, theta).y;
      for (int k = 0; k < 100; ++k) {
        const Vector u = rng.unit_sphere(p.dimension());
        CHECK(linear_oracle(p, theta + 0.99 * rho * u).y == y);
      }
    }
  }
}

TEST_CASE("positive homogeneity") {
  Stream rng(8);
  const auto p = SolutionPolytope::permutahedron(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector theta = testing::gaussian_vector(rng, 5);
    const double c = std::ldexp(1.0, static_cast<int>(rng.index(9)) - 4);
    CHECK(linear_oracle(p, c * theta).y == linear_oracle(p, theta).y);
    CHECK(internal_radius(p, c * theta) == c * internal_radius(p, theta));
    const double c2 = 0.1 + 5 * rng.uniform();
    CHECK(internal_radius(p, c2 * theta) ==
          doctest::Approx(c2 * internal_radius(p, theta)).epsilon(1e-12));
  }
}

TEST_CASE("p0 examples") {
  Stream rng(3);
  const auto two = two_point();
  const auto dirac = p0(two, vec({0.7}), rng);
  REQUIRE(dirac.is_dirac);
  CHECK(dirac.support[0].y == vec({1}));
  CHECK(dirac.support[0].probability == 1.0);

  const auto split = p0(two, vec({0.0}), rng);
  CHECK_FALSE(split.is_dirac);
  REQUIRE(split.support.size() == 2);
  for (const auto& atom : split.support) {
    CHECK(std::abs(atom.probability - 0.5) <= 3 * atom.std_error);
  }

  const auto p3 = SolutionPolytope::permutahedron(3);
  const auto m = p0(p3, vec({1, 1, 4}), rng);
  REQUIRE(m.support.size() == 2);
  double total = 0.0;
  for (const auto& atom : m.support) {
    CHECK(atom.y[2] == 3.0);
    CHECK(std::abs(atom.probability - 0.5) <= 3 * atom.std_error);
    total += atom.probability;
  }
  CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("p0 probabilities sum to one") {
  Stream rng(4);
  const auto p = SolutionPolytope::permutahedron(3);
  for (const Vector& theta : {vec({0, 0, 0}), vec({2, 2, 1}), vec({0.3, 0.1, 0.2})}) {
    const auto m = p0(p, theta, rng, 20000);
    double total = 0.0, var = 0.0;
    for (const auto& a : m.support) {
      total += a.probability;
      var += a.std_error * a.std_error;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12 + 3 * std::sqrt(var));
  }
}

TEST_CASE("normal fan examples") {
  const auto fan1 = enumerate_normal_fan(two_point());
  REQUIRE(fan1.size() == 2);
  CHECK(fan1[0].normals(0, 0) == -1.0);
  CHECK(fan1[1].normals(0, 0) == 1.0);

  const auto p2 = SolutionPolytope::permutahedron(2);
  const auto fan2 = enumerate_normal_fan(p2);
  REQUIRE(fan2.size() == 2);
  const double h = 1.0 / std::sqrt(2.0);
  CHECK(fan2[0].vertex == vec({1, 2}));
  CHECK(fan2[0].normals(0, 0) == doctest::Approx(-h));
  CHECK(fan2[0].normals(0, 1) == doctest::Approx(h));
  CHECK(fan2[1].normals(0, 0) == doctest::Approx(h));

  const auto fan3 = enumerate_normal_fan(SolutionPolytope::permutahedron(3));
  REQUIRE(fan3.size() == 6);
  for (const auto& cone : fan3) {
    CHECK(cone.normals.rows() == 5);
    // Facets come from adjacent transpositions, which are at distance sqrt(2).
    int facets = 0;
    for (Eigen::Index r = 0; r < 5; ++r) {
      CHECK(cone.normals.row(r).norm() == doctest::Approx(1.0));
    }
    for (std::size_t j = 0; j < 6; ++j) {
      if ((fan3[j].vertex - cone.vertex).squaredNorm() == 2.0) ++facets;
    }
    CHECK(facets == 2);
  }
}

TEST_CASE("index lookup") {
  const auto p = SolutionPolytope::permutahedron(3);
  CHECK(p.index_of(vec({1, 2, 3})) == std::optional<std::size_t>(0));
  CHECK_FALSE(p.index_of(vec({1, 1, 3})).has_value());
  CHECK_FALSE(p.index_of(vec({1, 2})).has_value());
}

}  // TEST_SUITE
