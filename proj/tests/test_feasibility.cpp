#include "pevccp/errors.hpp"
#include "pevccp/feasibility.hpp"
#include "pevccp/rng.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace pevccp;

namespace {

PevModel simple_pev(int t_len) {
  PevModel pev;
  pev.battery_capacity_kwh = 10.0;
  pev.charge_efficiency = 1.0;
  pev.initial_energy_kwh = 5.0;
  pev.min_soc = 0.2;
  pev.max_charge_kw = 3.5;
  pev.availability.assign(t_len, 1);
  pev.consumption_kwh = Vec::Zero(t_len);
  return pev;
}

}  // namespace

TEST_CASE("build_feasible_set single-step rows") {
  TimeGrid grid{1, 1.0};
  FeasibleSet f = build_feasible_set(simple_pev(1), grid);
  REQUIRE(f.row_count() == 2);
  // ceiling: x1 <= C - E0 = 5 ; floor: -x1 <= E0 - SOC_min*C = 3
  CHECK(f.a_matrix(0, 0) == 1.0);
  CHECK(f.b_vector(0) == 5.0);
  CHECK(f.a_matrix(1, 0) == -1.0);
  CHECK(f.b_vector(1) == 3.0);
  CHECK(f.lower(0) == 0.0);
  CHECK(f.upper(0) == 3.5);
}

TEST_CASE("build_feasible_set forces charging before a trip") {
  TimeGrid grid{2, 1.0};
  PevModel pev = simple_pev(2);
  pev.availability = {1, 0};
  pev.consumption_kwh << 0.0, 4.0;
  FeasibleSet f = build_feasible_set(pev, grid);
  REQUIRE(f.row_count() == 4);
  // floor row through step 2: -(x1 + x2) <= E0 - 4 - SOC_min*C, and the box
  // pins x2 = 0, so x1 >= SOC_min*C - E0 + 4 = 1.
  CHECK(f.b_vector(3) == doctest::Approx(5.0 - 4.0 - 2.0));
  CHECK(f.upper(1) == 0.0);
  Vec x(2);
  x << 0.999, 0.0;
  CHECK(f.polytope_violation(x) > 0.0);
  x(0) = 1.001;
  CHECK(f.polytope_violation(x) == 0.0);

  // cross-check the rows against the forward battery simulation
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    Vec probe(2);
    probe << rng.uniform(0.0, 3.5), 0.0;
    Vec energy = testsupport::simulate_energy(pev, grid, probe);
    double floor_kwh = pev.min_soc * pev.battery_capacity_kwh;
    bool traj_ok = energy.minCoeff() >= floor_kwh - 1e-9 &&
                   energy.maxCoeff() <= pev.battery_capacity_kwh + 1e-9;
    bool set_ok = f.max_violation(probe) <= 1e-9;
    CHECK(traj_ok == set_ok);
  }
}

TEST_CASE("build_feasible_set uses the efficiency-scaled step") {
  TimeGrid grid{4, 0.25};
  PevModel pev = simple_pev(4);
  pev.charge_efficiency = 0.9;
  FeasibleSet f = build_feasible_set(pev, grid);
  for (int t = 0; t < 4; ++t) {
    CHECK(f.a_matrix(2 * t, 0) == doctest::Approx(0.225));
    CHECK(f.a_matrix(2 * t + 1, 0) == doctest::Approx(-0.225));
  }
}

TEST_CASE("build_feasible_set has 2T rows and rejects infeasible vehicles") {
  TimeGrid grid{8, 0.5};
  PevModel pev = simple_pev(8);
  CHECK(build_feasible_set(pev, grid).row_count() == 16);

  pev.availability = {1, 0, 0, 0, 0, 0, 0, 0};
  pev.consumption_kwh = Vec::Zero(8);
  pev.consumption_kwh(2) = 100.0;
  try {
    build_feasible_set(pev, grid);
    FAIL("expected InfeasiblePevError");
  } catch (const InfeasiblePevError& e) {
    CHECK(e.earliest_violated_step == 2);
  }
}

TEST_CASE("projection returns feasible points unchanged") {
  TimeGrid grid{3, 1.0};
  FeasibleSet f = build_feasible_set(simple_pev(3), grid);
  Vec y(3);
  y << 1.0, 0.5, 0.0;
  REQUIRE(f.max_violation(y) == 0.0);
  Vec p = project_box_polytope(f, y);
  CHECK((p - y).norm() == 0.0);
}

TEST_CASE("projection onto a simplex face") {
  FeasibleSet f;
  f.a_matrix = Mat::Ones(1, 2);
  f.b_vector = Vec::Ones(1);
  f.lower = Vec::Zero(2);
  f.upper = Vec::Ones(2);
  Vec y(2);
  y << 1.0, 1.0;
  Vec p = project_box_polytope(f, y);
  CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-7));
  Vec ref = testsupport::enumerate_projection(f, y);
  CHECK((p - ref).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("projection matches the enumeration oracle on random sets") {
  Rng rng(101);
  for (int rep = 0; rep < 40; ++rep) {
    int t = rng.uniform_int(1, 3);
    Scenario s = testsupport::random_small_scenario(rng, 1, t);
    FeasibleSet f = build_feasible_set(s.fleet[0], s.grid);
    Vec y(t);
    for (int i = 0; i < t; ++i) y(i) = rng.uniform(-4.0, 8.0);
    Vec got = project_box_polytope(f, y);
    Vec ref = testsupport::enumerate_projection(f, y);
    REQUIRE(ref.size() == t);
    CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(f.box_violation(got) == 0.0);
    CHECK(f.polytope_violation(got) <= 1e-7);
  }
}

TEST_CASE("projection idempotence and non-expansiveness") {
  Rng rng(202);
  for (int rep = 0; rep < 30; ++rep) {
    int t = rng.uniform_int(1, 6);
    Scenario s = testsupport::random_small_scenario(rng, 1, t);
    FeasibleSet f = build_feasible_set(s.fleet[0], s.grid);
    Vec y1(t), y2(t);
    for (int i = 0; i < t; ++i) {
      y1(i) = rng.uniform(-5.0, 8.0);
      y2(i) = rng.uniform(-5.0, 8.0);
    }
    Vec p1 = project_box_polytope(f, y1);
    Vec p2 = project_box_polytope(f, y2);
    CHECK((project_box_polytope(f, p1) - p1).norm() < 1e-7);
    CHECK((p1 - p2).norm() <= (y1 - y2).norm() + 1e-9);
  }
}

TEST_CASE("membership matches the simulated energy trajectory") {
  Rng rng(303);
  for (int rep = 0; rep < 60; ++rep) {
    int t = rng.uniform_int(2, 8);
    Scenario s = testsupport::random_small_scenario(rng, 1, t);
    const PevModel& pev = s.fleet[0];
    FeasibleSet f = build_feasible_set(pev, s.grid);
    Vec x(t);
    for (int i = 0; i < t; ++i)
      x(i) = pev.availability[i] ? rng.uniform(0.0, pev.max_charge_kw) : 0.0;
    Vec energy = testsupport::simulate_energy(pev, s.grid, x);
    double floor_kwh = pev.min_soc * pev.battery_capacity_kwh;
    double traj_breach = std::max(floor_kwh - energy.minCoeff(),
                                  energy.maxCoeff() - pev.battery_capacity_kwh);
    double set_breach = f.polytope_violation(x);
    if (traj_breach <= 0.0) CHECK(set_breach <= 1e-9);
    if (traj_breach > 1e-6) CHECK(set_breach > 0.0);
  }
}

TEST_CASE("halfline projections") {
  Vec y(2), floor(2), cap(2);
  y << 0.0, 5.0;
  floor << 1.0, 1.0;
  Vec pf = project_halfline_floor(y, floor);
  CHECK(pf(0) == 1.0);
  CHECK(pf(1) == 5.0);

  Vec y2(2);
  y2 << 30.0, 10.0;
  cap << 25.0, 25.0;
  Vec pc = project_halfline_cap(y2, cap);
  CHECK(pc(0) == 25.0);
  CHECK(pc(1) == 10.0);

  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    Vec a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = rng.uniform(-10, 10);
      b(i) = rng.uniform(-10, 10);
    }
    Vec lo = project_halfline_floor(a, b);
    Vec hi = project_halfline_cap(a, b);
    for (int i = 0; i < 4; ++i) {
      CHECK(lo(i) == std::max(a(i), b(i)));
      CHECK(hi(i) == std::min(a(i), b(i)));
    }
    CHECK((project_halfline_floor(lo, b) - lo).norm() == 0.0);
    CHECK((project_halfline_cap(hi, b) - hi).norm() == 0.0);
  }
}
