#include <doctest.h>

#include <cmath>
#include <random>

#include "proxstep/constraints.hpp"
#include "proxstep/particles.hpp"

using namespace proxstep;

namespace {

Vec vec1(double x) {
  Vec v(1);
  v << x;
  return v;
}

// the 1D fixed wall g(q) = q
std::shared_ptr<const ConstraintSystem> fixed_wall() {
  return make_affine_walls(1, {AffineWall{Vec::Ones(1), 0.0, 0.0}});
}

// the 1D moving wall g(t, q) = q - t
std::shared_ptr<const ConstraintSystem> moving_wall() {
  return make_affine_walls(1, {AffineWall{Vec::Ones(1), 0.0, -1.0}});
}

} // namespace

TEST_CASE("evaluate_all on simple walls") {
  CHECK(evaluate_all(*fixed_wall(), 0.0, vec1(0.7))[0] == doctest::Approx(0.7));
  CHECK(evaluate_all(*moving_wall(), 0.5, vec1(0.5))[0] == doctest::Approx(0.0));

  auto spheres = std::make_shared<SphereSystem>(
      std::vector<RadiusProfile>{{1.0, 0.0}, {1.0, 0.0}},
      std::vector<double>{1.0, 1.0}, 1.0);
  Vec q(6);
  q << 0, 0, 0, 3, 0, 0;
  const Vec values = evaluate_all(*non_overlap_constraints(spheres), 0.0, q);
  REQUIRE(values.size() == 1);
  CHECK(values[0] == doctest::Approx(1.0));
}

TEST_CASE("active_set thresholding") {
  // three walls whose values at q = 0 are 0.05, 0.2, 0.0
  auto walls = make_affine_walls(
      1, {AffineWall{Vec::Ones(1), 0.05, 0.0}, AffineWall{Vec::Ones(1), 0.2, 0.0},
          AffineWall{Vec::Ones(1), 0.0, 0.0}});
  const ActiveSet at_rho = active_set(*walls, 0.0, vec1(0.0), 0.1);
  CHECK(at_rho.indices == std::vector<int>{0, 2});

  auto far_wall = make_affine_walls(1, {AffineWall{Vec::Ones(1), 0.5, 0.0}});
  CHECK(active_set(*far_wall, 0.0, vec1(0.0), 0.0).indices.empty());

  auto touching = make_affine_walls(
      1, {AffineWall{Vec::Ones(1), 0.0, 0.0}, AffineWall{Vec::Ones(1), 0.0, 0.0}});
  CHECK(active_set(*touching, 0.0, vec1(0.0), 0.0).indices ==
        std::vector<int>{0, 1});
}

TEST_CASE("linearized velocity set rows") {
  SUBCASE("wall at contact") {
    const HalfspaceSystem k = linearized_velocity_set(*fixed_wall(), 0.0,
                                                      vec1(0.0), 0.1);
    REQUIRE(k.size() == 1);
    CHECK(k.normal(0)[0] == doctest::Approx(1.0));
    CHECK(k.offset(0) == doctest::Approx(0.0));
    CHECK(k.source(0) == 0);
    CHECK(k.contains(vec1(0.0)));
    CHECK(!k.contains(vec1(-1e-3)));
  }
  SUBCASE("wall with slack: u >= -g/h") {
    const HalfspaceSystem k = linearized_velocity_set(*fixed_wall(), 0.0,
                                                      vec1(0.05), 0.1);
    CHECK(k.offset(0) == doctest::Approx(-0.5));
    CHECK(k.contains(vec1(-0.5)));
    CHECK(!k.contains(vec1(-0.51)));
  }
  SUBCASE("touching sphere pair: row is the stacked contact gradient") {
    auto spheres = std::make_shared<SphereSystem>(
        std::vector<RadiusProfile>{{1.0, 0.0}, {1.0, 0.0}},
        std::vector<double>{1.0, 1.0}, 1.0);
    Vec q(6);
    q << 0, 0, 0, 2, 0, 0;
    const HalfspaceSystem k =
        linearized_velocity_set(*non_overlap_constraints(spheres), 0.0, q, 0.1);
    REQUIRE(k.size() == 1);
    CHECK(k.offset(0) == doctest::Approx(0.0));
    Vec expected(6);
    expected << -1, 0, 0, 1, 0, 0;
    CHECK((k.normal(0) - expected).norm() == doctest::Approx(0.0));
  }
  SUBCASE("screening omits provably inactive rows") {
    auto walls = make_affine_walls(
        1, {AffineWall{Vec::Ones(1), 0.0, 0.0}, AffineWall{Vec::Ones(1), 5.0, 0.0}});
    RowScreening screening;
    screening.enabled = true;
    screening.velocity_cap = 2.0;
    screening.gradient_bound = 1.0;
    screening.margin = 0.1;
    const HalfspaceSystem k =
        linearized_velocity_set(*walls, 0.0, vec1(0.0), 0.1, screening);
    REQUIRE(k.size() == 1);
    CHECK(k.source(0) == 0);
  }
}

TEST_CASE("admissible velocity cone") {
  SUBCASE("wall at contact") {
    const HalfspaceSystem cone = admissible_velocity_cone(*fixed_wall(), 0.0,
                                                          vec1(0.0));
    REQUIRE(cone.size() == 1);
    CHECK(cone.offset(0) == doctest::Approx(0.0));
    CHECK(cone.contains(vec1(0.0)));
  }
  SUBCASE("moving wall demands the wall speed") {
    const HalfspaceSystem cone = admissible_velocity_cone(*moving_wall(), 1.5,
                                                          vec1(1.5));
    REQUIRE(cone.size() == 1);
    CHECK(cone.offset(0) == doctest::Approx(1.0)); // u >= 1
    CHECK(cone.contains(vec1(1.0)));
    CHECK(!cone.contains(vec1(0.9)));
  }
  SUBCASE("interior point gives the trivial cone") {
    const HalfspaceSystem cone = admissible_velocity_cone(*fixed_wall(), 0.0,
                                                          vec1(0.5), 0.0);
    CHECK(cone.empty());
    CHECK(cone.contains(vec1(-100.0)));
  }
}

TEST_CASE("zero gradient rows are rejected") {
  CHECK_THROWS_AS(make_affine_walls(1, {AffineWall{Vec::Zero(1), 0.0, 0.0}}),
                  ZeroGradientError);

  HalfspaceSystem h(2);
  CHECK_THROWS_AS(h.add_row(Vec::Zero(2), 0.0), ZeroGradientError);
}

TEST_CASE("feasible point always admits u = 0 in the linearized set") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  auto walls = make_affine_walls(
      2, {AffineWall{(Vec(2) << 1, 0).finished(), 1.0, 0.0},
          AffineWall{(Vec(2) << 0, 1).finished(), 1.0, 0.0},
          AffineWall{(Vec(2) << -1, -1).finished(), 3.0, 0.0}});
  for (int trial = 0; trial < 50; ++trial) {
    Vec q(2);
    q << coord(rng), coord(rng);
    const Vec values = evaluate_all(*walls, 0.0, q);
    if (values.minCoeff() < 0.0) {
      continue;
    }
    const HalfspaceSystem k = linearized_velocity_set(*walls, 0.0, q, 0.05);
    CHECK(k.contains(Vec::Zero(2), 1e-12));
  }
}

TEST_CASE("for convex constraints the linearized set preserves feasibility") {
  // affine walls are convex in q: u in K_h implies g(q + h u) >= 0
  auto walls = make_affine_walls(
      2, {AffineWall{(Vec(2) << 1, 0.5).finished(), 0.3, 0.0},
          AffineWall{(Vec(2) << -0.2, 1).finished(), 0.4, 0.0}});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-0.2, 0.2);
  const double h = 0.1;
  for (int trial = 0; trial < 50; ++trial) {
    Vec q(2);
    q << coord(rng), coord(rng);
    if (evaluate_all(*walls, 0.0, q).minCoeff() < 0.0) {
      continue;
    }
    Vec u(2);
    u << 4.0 * coord(rng), 4.0 * coord(rng);
    const HalfspaceSystem k = linearized_velocity_set(*walls, 0.0, q, h);
    if (!k.contains(u, 0.0)) {
      continue;
    }
    CHECK(evaluate_all(*walls, 0.0, q + h * u).minCoeff() >= -1e-12);
  }
}

TEST_CASE("analytic derivatives match central differences") {
  const double omega = 0.5;
  FunctionalConstraint wall;
  wall.value = [omega](double t, const Vec& q) {
    return std::cos(omega * t) * q[0] + std::sin(omega * t) * q[1] - 0.5;
  };
  wall.gradient = [omega](double t, const Vec&) {
    return (Vec(2) << std::cos(omega * t), std::sin(omega * t)).finished();
  };
  wall.time_derivative = [omega](double t, const Vec& q) {
    return omega * (-std::sin(omega * t) * q[0] + std::cos(omega * t) * q[1]);
  };
  wall.time_dependent = true;
  auto analytic = make_functional_system(2, {wall});

  FunctionalConstraint fd_only;
  fd_only.value = wall.value;
  fd_only.time_dependent = true;
  auto fallback = make_functional_system(2, {fd_only});

  Vec q(2);
  q << 0.8, -0.3;
  const double t = 1.2;
  CHECK((analytic->gradient(0, t, q) - fallback->gradient(0, t, q)).norm() <
        1e-8);
  CHECK(analytic->time_derivative(0, t, q) ==
        doctest::Approx(fallback->time_derivative(0, t, q)).epsilon(1e-7));
}

TEST_CASE("spot check assumptions") {
  SUBCASE("single unit wall: alpha = beta = gamma = 1") {
    const std::vector<std::pair<double, Vec>> samples = {{0.0, vec1(0.05)}};
    const AssumptionReport report =
        spot_check_assumptions(*fixed_wall(), samples, 16);
    CHECK(report.gradient_norm_min == doctest::Approx(1.0));
    CHECK(report.gradient_norm_max == doctest::Approx(1.0));
    CHECK(!report.gamma_vacuous);
    REQUIRE(report.gamma_estimate.has_value());
    CHECK(*report.gamma_estimate == doctest::Approx(1.0));
    CHECK(report.flags.empty());
  }
  SUBCASE("opposing walls sampled mid-gap: gamma is vacuous") {
    auto opposing = make_affine_walls(
        1, {AffineWall{Vec::Ones(1), 0.0, 0.0},
            AffineWall{-Vec::Ones(1), 1.0, 0.0}});
    SpotCheckParams params;
    params.almost_active_rho = 0.2; // < 0.5, neither wall almost active
    const std::vector<std::pair<double, Vec>> samples = {{0.0, vec1(0.5)}};
    const AssumptionReport report =
        spot_check_assumptions(*opposing, samples, 16, params);
    CHECK(report.gamma_vacuous);
    CHECK(!report.gamma_estimate.has_value());
  }
  SUBCASE("touching spheres: gradient norm sqrt(2), gamma finite") {
    auto spheres = std::make_shared<SphereSystem>(
        std::vector<RadiusProfile>{{1.0, 0.0}, {1.0, 0.0}},
        std::vector<double>{1.0, 1.0}, 1.0);
    Vec q(6);
    q << 0, 0, 0, 2, 0, 0;
    const std::vector<std::pair<double, Vec>> samples = {{0.0, q}};
    const AssumptionReport report =
        spot_check_assumptions(*non_overlap_constraints(spheres), samples, 16);
    CHECK(report.gradient_norm_min == doctest::Approx(std::sqrt(2.0)));
    CHECK(report.gradient_norm_max == doctest::Approx(std::sqrt(2.0)));
    REQUIRE(report.gamma_estimate.has_value());
    CHECK(*report.gamma_estimate == doctest::Approx(1.0));
  }
}

TEST_CASE("combined systems keep part order and values") {
  auto first = make_affine_walls(1, {AffineWall{Vec::Ones(1), 0.0, 0.0}});
  auto second = make_affine_walls(
      1, {AffineWall{-Vec::Ones(1), 2.0, 0.0}, AffineWall{Vec::Ones(1), 5.0, 0.0}});
  auto combined = combine_systems({first, second});
  REQUIRE(combined->size() == 3);
  const Vec q = vec1(0.25);
  CHECK(combined->value(0, 0.0, q) == doctest::Approx(0.25));
  CHECK(combined->value(1, 0.0, q) == doctest::Approx(1.75));
  CHECK(combined->value(2, 0.0, q) == doctest::Approx(5.25));
  CHECK(combined->gradient(1, 0.0, q)[0] == doctest::Approx(-1.0));
  CHECK(!combined->time_dependent());
}

TEST_CASE("evaluation domain failures surface as errors") {
  FunctionalConstraint guarded;
  guarded.value = [](double, const Vec& q) -> double {
    if (q[0] > 10.0) {
      throw EvaluationDomainError("outside evaluation neighborhood");
    }
    return q[0];
  };
  auto system = make_functional_system(1, {guarded});
  CHECK(evaluate_all(*system, 0.0, vec1(1.0))[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(evaluate_all(*system, 0.0, vec1(11.0)), EvaluationDomainError);
}
