#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "proxstep/particles.hpp"
#include "proxstep/scenario_config.hpp"
#include "proxstep/scheme.hpp"
#include "test_scenarios.hpp"

using namespace proxstep;

namespace {

Vec vec1(double x) {
  Vec v(1);
  v << x;
  return v;
}

bool bitwise_equal(const Trajectory& a, const Trajectory& b) {
  if (a.records.size() != b.records.size()) {
    return false;
  }
  auto same = [](const Vec& x, const Vec& y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0;
  };
  for (std::size_t n = 0; n < a.records.size(); ++n) {
    const StepRecord& ra = a.records[n];
    const StepRecord& rb = b.records[n];
    if (ra.t != rb.t || !same(ra.q, rb.q) || !same(ra.u, rb.u) ||
        !same(ra.lambda, rb.lambda)) {
      return false;
    }
  }
  return true;
}

} // namespace

TEST_CASE("average force") {
  SUBCASE("constant force averages to itself") {
    const ForceField f = [](double, const Vec&) { return vec1(3.5); };
    CHECK(average_force(f, 0.2, 0.1, vec1(0.0))[0] == doctest::Approx(3.5));
  }
  SUBCASE("trapezoid is exact for affine-in-t forces") {
    const ForceField f = [](double t, const Vec&) { return vec1(t); };
    CHECK(average_force(f, 0.0, 0.1, vec1(0.0))[0] == doctest::Approx(0.05));
  }
  SUBCASE("sin force against the closed-form average") {
    const ForceField f = [](double t, const Vec&) { return vec1(std::sin(t)); };
    const double h = 0.1;
    const double exact = (1.0 - std::cos(h)) / h;
    CHECK(std::abs(average_force(f, 0.0, h, vec1(0.0))[0] - exact) < 1e-4);
    CHECK(std::abs(average_force_adaptive(f, 0.0, h, vec1(0.0))[0] - exact) <
          1e-9);
  }
}

TEST_CASE("single prediction-correction steps") {
  SUBCASE("wall contact: u -> 0, lambda = mu/h") {
    Scenario s = testing::restitution_drop(0.0);
    const StepRecord r = step(0.0, vec1(0.0), vec1(-1.0), s, 0.1);
    CHECK(r.u[0] == doctest::Approx(0.0));
    CHECK(r.q[0] == doctest::Approx(0.0));
    CHECK(r.lambda[0] == doctest::Approx(10.0));
    CHECK(r.residuals.balance <= 1e-12);
    CHECK(r.active.indices == std::vector<int>{0});
  }
  SUBCASE("interior point: identity step, zero intensities") {
    Scenario s = testing::restitution_drop(0.0);
    const StepRecord r = step(0.0, vec1(0.5), vec1(0.1), s, 0.01);
    CHECK(r.u[0] == doctest::Approx(0.1));
    CHECK(r.lambda[0] == doctest::Approx(0.0));
    CHECK(r.active.indices.empty());
  }
  SUBCASE("two touching spheres head-on stop at the common mean") {
    ConfiguredScenario two_ball = make_builtin("two-ball");
    Scenario s = two_ball.scenario;
    Vec q(6);
    q << -1, 0, 0, 1, 0, 0; // touching: centers 2 apart, radii 1
    Vec u(6);
    u << 1, 0, 0, -1, 0, 0;
    const StepRecord r = step(0.0, q, u, s, 1e-3);
    CHECK(r.u.lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(r.lambda[0] > 0.0);
  }
}

TEST_CASE("restitution step") {
  SUBCASE("e = 0 is bitwise the base scheme") {
    Scenario s = testing::restitution_drop(0.0);
    const StepRecord base = step(0.0, vec1(0.02), vec1(-1.0), s, 0.1);
    const StepRecord rest = step_with_restitution(0.0, vec1(0.02), vec1(-1.0), s, 0.1);
    CHECK(base.u[0] == rest.u[0]);
    CHECK(base.q[0] == rest.q[0]);
    CHECK(base.lambda[0] == rest.lambda[0]);
  }
  SUBCASE("new contact reflects the removed normal component") {
    Scenario s = testing::restitution_drop(0.5);
    const StepRecord r = step_with_restitution(0.0, vec1(0.0), vec1(-1.0), s, 0.1);
    // P = 0, residual v - P = -1, reflected: 0 - 0.5 * (-1) = 0.5
    CHECK(r.u[0] == doctest::Approx(0.5));
  }
  SUBCASE("sustained contact is not re-reflected") {
    Scenario s = testing::restitution_drop(0.5);
    Vec prev_lambda = vec1(3.0); // the contact was already active
    const StepRecord r =
        step_with_restitution(0.0, vec1(0.0), vec1(-1.0), s, 0.1, &prev_lambda);
    CHECK(r.u[0] == doctest::Approx(0.0));
  }
  SUBCASE("time-dependent constraints reject e > 0") {
    Scenario s = testing::closing_walls();
    s.restitution = 0.5;
    CHECK_THROWS_AS(validate(s), UnsupportedTimeDependentError);
    CHECK_THROWS_AS(
        step_with_restitution(0.0, vec1(0.5), vec1(0.0), s, 0.01),
        UnsupportedTimeDependentError);
  }
}

TEST_CASE("free flight is exact advection") {
  const Scenario s = testing::free_flight();
  const SimulationResult result = simulate(s, 0.01);
  REQUIRE(result.ok());
  for (const StepRecord& r : result.trajectory.records) {
    CHECK((r.q - (s.q0 + r.t * s.u0)).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((r.u - s.u0).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("bouncing ball run against the closed form") {
  const ConfiguredScenario configured = make_builtin("bouncing-ball");
  const double h = 1e-3;
  const SimulationResult result = simulate(configured.scenario, h);
  REQUIRE(result.ok());
  const auto& records = result.trajectory.records;
  REQUIRE(records.size() == 2001);

  const double t_star = std::sqrt(2.0);
  double impact_time = 0.0;
  for (std::size_t n = 0; n + 1 < records.size(); ++n) {
    // pre-impact flight matches q(t) = 1 - t^2/2 to first order
    if (records[n].t < t_star - 0.05) {
      const double exact = 1.0 - 0.5 * records[n].t * records[n].t;
      CHECK(std::abs(records[n].q[0] - exact) <= 2.0 * h);
    }
    if (impact_time == 0.0 &&
        std::abs(records[n + 1].u[0] - records[n].u[0]) > 0.5) {
      impact_time = records[n + 1].t;
      CHECK(std::abs(records[n].u[0] + t_star) <= 3.0 * h); // pre-impact speed
    }
  }
  CHECK(std::abs(impact_time - t_star) <= 5.0 * h);

  // sustained contact afterwards: q = 0, u = 0, lambda balances gravity
  const StepRecord& last = records.back();
  CHECK(std::abs(last.q[0]) <= 1e-9);
  CHECK(std::abs(last.u[0]) <= 1e-9);
  CHECK(last.lambda[0] == doctest::Approx(1.0).epsilon(1e-6));

  // grid feasibility and per-step invariants
  for (std::size_t n = 1; n < records.size(); ++n) {
    const StepRecord& r = records[n];
    CHECK(r.q[0] >= -1e-9);
    CHECK(r.lambda.minCoeff() >= 0.0);
    CHECK(r.residuals.balance <=
          1e-8 * (1.0 + records[n - 1].u.norm() / h));
    // complementarity: positive intensity only with saturated row
    if (r.lambda[0] > 1e-8) {
      const double slack =
          configured.scenario.constraints->value(0, r.t, records[n - 1].q) +
          h * r.u[0];
      CHECK(std::abs(r.lambda[0] * slack) <= 1e-8);
    }
  }
}

TEST_CASE("moving wall run against the exact pursuit solution") {
  const ConfiguredScenario configured = make_builtin("moving-wall");
  const double h = 1e-3;
  const SimulationResult result = simulate(configured.scenario, h);
  REQUIRE(result.ok());
  for (const StepRecord& r : result.trajectory.records) {
    const double exact = std::max(2.0, r.t);
    CHECK(std::abs(r.q[0] - exact) <= 3.0 * h);
  }
  CHECK(result.trajectory.records.back().u[0] == doctest::Approx(1.0));
}

TEST_CASE("energy decays under projection with no force") {
  Scenario s = testing::restitution_drop(0.0);
  s.u0 = vec1(-2.0);
  const SimulationResult result = simulate(s, 0.01);
  REQUIRE(result.ok());
  double previous = std::numeric_limits<double>::infinity();
  for (const StepRecord& r : result.trajectory.records) {
    const double energy = 0.5 * r.u.squaredNorm();
    CHECK(energy <= previous + 1e-12);
    previous = energy;
  }
}

TEST_CASE("partial final step covers the horizon exactly") {
  Scenario s = testing::free_flight();
  const SimulationResult result = simulate(s, 0.3);
  REQUIRE(result.ok());
  const auto& records = result.trajectory.records;
  REQUIRE(records.size() == 5); // 0, 0.3, 0.6, 0.9, 1.0
  CHECK(records[3].t == doctest::Approx(0.9));
  CHECK(records[4].t == doctest::Approx(1.0));
  CHECK((records[4].q - (s.q0 + 1.0 * s.u0)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("initial state validation") {
  SUBCASE("infeasible start is rejected") {
    Scenario s = testing::restitution_drop(0.0);
    s.q0 = vec1(-0.5);
    CHECK_THROWS_AS(validate(s), InvalidScenarioError);
  }
  SUBCASE("boundary start needs an admissible velocity") {
    Scenario s = testing::restitution_drop(0.0);
    s.q0 = vec1(0.0);
    s.u0 = vec1(1.0);
    CHECK_NOTHROW(validate(s));
    s.u0 = vec1(-1.0);
    CHECK_THROWS_AS(validate(s), InvalidScenarioError);
  }
  SUBCASE("size mismatches are rejected") {
    Scenario s = testing::free_flight();
    s.q0 = Vec::Zero(3);
    CHECK_THROWS_AS(validate(s), InvalidScenarioError);
  }
}

TEST_CASE("step failure aborts with a partial trajectory") {
  const Scenario s = testing::closing_walls();
  const SimulationResult result = simulate(s, 0.01);
  CHECK(!result.ok());
  CHECK(result.failed_step > 0);
  CHECK(result.trajectory.records.size() ==
        static_cast<std::size_t>(result.failed_step));
  // the squeeze happens once the walls meet near t = 1
  CHECK(result.trajectory.records.back().t > 0.8);
  CHECK(result.trajectory.records.back().t < 1.2);
}

TEST_CASE("identical scenarios give bitwise identical trajectories") {
  const ConfiguredScenario configured = make_builtin("bouncing-ball");
  const SimulationResult a = simulate(configured.scenario, 2e-3);
  const SimulationResult b = simulate(configured.scenario, 2e-3);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(bitwise_equal(a.trajectory, b.trajectory));
  CHECK(a.trajectory.scenario_hash == b.trajectory.scenario_hash);

  const ConfiguredScenario other = make_builtin("moving-wall");
  CHECK(scenario_fingerprint(configured.scenario) !=
        scenario_fingerprint(other.scenario));
}

TEST_CASE("restitution drop bounces at half speed on aligned grids") {
  const Scenario s = testing::restitution_drop(0.5);
  const double h = 0.01; // 1/h integer: impact lands exactly on the wall
  const SimulationResult result = simulate(s, h);
  REQUIRE(result.ok());
  const auto& records = result.trajectory.records;
  double post_speed = 0.0;
  for (std::size_t n = 0; n + 1 < records.size(); ++n) {
    if (records[n].u[0] < 0.0 && records[n + 1].u[0] >= 0.0) {
      post_speed = records[n + 1].u[0];
      break;
    }
  }
  CHECK(std::abs(post_speed - 0.5) <= 10.0 * h);
}

TEST_CASE("screened and unscreened runs agree") {
  ConfiguredScenario configured = make_builtin("box-4-spheres");
  Scenario& s = configured.scenario;
  const SimulationResult plain = simulate(s, 5e-3);
  REQUIRE(plain.ok());

  s.screening.enabled = true;
  s.screening.velocity_cap = 4.0;
  s.screening.gradient_bound = std::sqrt(2.0);
  s.screening.margin = 0.05;
  const SimulationResult screened = simulate(s, 5e-3);
  REQUIRE(screened.ok());
  CHECK(bitwise_equal(plain.trajectory, screened.trajectory));
}
