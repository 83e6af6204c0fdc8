#include <gtest/gtest.h>

#include <cmath>

#include "c3bf/sim_engine.hpp"

using namespace c3bf;

namespace {

Obstacle circle(double x, double y, double radius, Vec2 vel = Vec2::Zero(), std::string id = "o") {
  return {PlanarEllipse{radius, radius}, {Vec3(x, y, 0), Vec3(vel.x(), vel.y(), 0)}, std::move(id)};
}

template <class Model>
Scenario<Model> single(typename Model::State s, Target target, std::vector<Obstacle> obs,
                       double duration = 10.0) {
  Scenario<Model> sc;
  AgentSpec<Model> a;
  a.initial = s;
  a.target = target;
  sc.agents = {a};
  sc.obstacles = std::move(obs);
  sc.sim.duration = duration;
  return sc;
}

Scenario<Unicycle> unicycle_head_on() {
  UnicycleState s{0, 0, 0, 0, 0};
  auto sc = single<Unicycle>(s, Waypoint{Vec3(10, 0.3, 0), 1.0}, {circle(4, 0.4, 0.6)}, 15.0);
  sc.params.l = 0.1;
  return sc;
}

template <class Model>
void expect_safe(const TrajectoryLog<Model>& log) {
  ASSERT_EQ(log.status, RunStatus::Completed) << log.message;
  const auto rep = collision_report(log);
  EXPECT_GE(rep.min_h(), -1e-2);
  EXPECT_GE(rep.min_margin(), -1e-3);
  EXPECT_FALSE(rep.violated());
}

}  // namespace

TEST(Rk4, ExponentialDecay) {
  const auto f = [](const Vec<1>& x) -> Vec<1> { return -x; };
  const Vec<1> x1 = rk4(f, Vec<1>(1.0), 0.1);
  EXPECT_NEAR(x1(0), std::exp(-0.1), 1e-7);
}

TEST(Rk4, ExactOnConstantDerivative) {
  const auto f = [](const Vec2&) -> Vec2 { return Vec2(2.0, -0.5); };
  EXPECT_EQ(rk4(f, Vec2(1.0, 1.0), 0.25), Vec2(1.5, 0.875));
  PointMassState s{{0, 0}, {1, 2}};
  const auto n = rk4_step<PointMass>(s, Vec2(0.5, -1.0), {}, 0.2);
  // quadratic trajectories are integrated exactly
  EXPECT_NEAR(n.pos.x(), 0.2 + 0.5 * 0.5 * 0.04, 1e-15);
  EXPECT_NEAR(n.pos.y(), 0.4 - 0.5 * 0.04, 1e-15);
}

TEST(Rk4, FourthOrder) {
  // pendulum, reference from 1000 substeps
  const auto f = [](const Vec2& x) -> Vec2 { return Vec2(x(1), -std::sin(x(0))); };
  const Vec2 x0(1.2, 0.3);
  const auto ref = [&](double dt) {
    Vec2 x = x0;
    for (int i = 0; i < 1000; ++i) x = rk4(f, x, dt / 1000);
    return x;
  };
  const double e1 = (rk4(f, x0, 0.2) - ref(0.2)).norm();
  const double e2 = (rk4(f, x0, 0.1) - ref(0.1)).norm();
  EXPECT_GE(e1 / e2, 15.0);
}

TEST(Rk4, NonFiniteStateThrows) {
  PointMassState s{{0, 0}, {1e308, 0}};
  EXPECT_THROW(rk4_step<PointMass>(s, Vec2(1e308, 0), {}, 10.0), NumericError);
  EXPECT_THROW(rk4_step<PointMass>(s, Vec2(0, 0), {}, 0.0), DomainError);
}

TEST(Run, NoObstaclesIsUnfiltered) {
  auto sc = single<Unicycle>({0, 0, 0, 0, 0}, ConstantVelocity{1.0, 0.5}, {}, 2.0);
  const auto log = run(sc);
  EXPECT_EQ(log.status, RunStatus::Completed);
  ASSERT_EQ(log.records.size(), 201u);
  for (std::size_t k = 0; k < log.records.size(); ++k) {
    EXPECT_EQ(log.records[k].u_star, log.records[k].u_ref);
    if (k > 0) EXPECT_GT(log.records[k].t, log.records[k - 1].t);
  }
  EXPECT_DOUBLE_EQ(log.records.back().t, 2.0);
}

TEST(Run, UnicycleHeadOnStaysSafe) {
  const auto sc = unicycle_head_on();
  ASSERT_GE(evaluate_barrier<Unicycle>(sc.barrier, sc.agents[0].initial, sc.params, sc.obstacles[0]).h,
            0.0);
  const auto log = run(sc);
  expect_safe(log);
  EXPECT_GT(max_intervention(log), 0.1);
  EXPECT_GT(log.records.back().state(0), 1.0);
}

TEST(Run, PointMassHeadOnMovingObstacle) {
  auto sc = single<PointMass>({{0, 0}, {1, 0}}, ConstantVelocity{1.0, 0.0},
                              {circle(6, 0.8, 0.5, {-1, 0})}, 8.0);
  ASSERT_GE(evaluate_barrier<PointMass>(sc.barrier, sc.agents[0].initial, sc.params, sc.obstacles[0]).h,
            0.0);
  expect_safe(run(sc));
}

TEST(Run, ObstacleKinematicsExact) {
  auto sc = single<PointMass>({{0, 0}, {0, 0}}, ConstantVelocity{}, {circle(3, 4, 0.5, {0.1, -0.3})}, 1.0);
  const auto log = run(sc);
  for (const auto& rec : log.records) {
    const Vec3 expected = sc.obstacles[0].state.center + sc.obstacles[0].state.velocity * rec.t;
    EXPECT_EQ(rec.obstacles[0].center, expected);
  }
}

TEST(Run, Deterministic) {
  const auto sc = unicycle_head_on();
  const auto a = run(sc);
  const auto b = run(sc);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_TRUE((a.records[k].state.array() == b.records[k].state.array()).all());
    EXPECT_TRUE((a.records[k].u_star.array() == b.records[k].u_star.array()).all());
    EXPECT_EQ(a.records[k].obstacles[0].h, b.records[k].obstacles[0].h);
  }
}

TEST(Run, DtRefinementTightensMinima) {
  auto sc = single<PointMass>({{0, 0}, {2, 0}}, ConstantVelocity{2.0, 0.0},
                              {circle(6, 0.9, 0.5, {-1.5, 0})}, 5.0);
  const auto coarse = collision_report(run(sc));
  sc.sim.dt = 0.001;
  const auto fine = collision_report(run(sc));
  const auto violation = [](double m) { return std::max(0.0, -m); };
  EXPECT_LE(violation(fine.min_h()), violation(coarse.min_h()));
  EXPECT_LE(violation(fine.min_margin()), violation(coarse.min_margin()));
  EXPECT_GE(fine.min_margin(), -1e-3);
}

TEST(Run, StartUnsafeFollowsEnvelope) {
  auto sc = single<PointMass>({{0, 0}, {1.5, 0}}, ConstantVelocity{1.5, 0.0}, {circle(6, 0.0, 0.8)}, 8.0);
  sc.start_unsafe = true;
  const auto log = run(sc);
  ASSERT_EQ(log.status, RunStatus::Completed) << log.message;
  EXPECT_LT(log.records.front().obstacles[0].h, 0.0);
  EXPECT_GE(decay_envelope_margin(log, 0, sc.class_k.gamma), -1e-2);
}

TEST(Run, InfeasibleIsReported) {
  // braking is capped, so a fast head-on approach cannot be resolved
  auto sc = single<PointMass>({{0, 0}, {0, 0}}, ConstantVelocity{}, {circle(5, 0.0, 1.0, {-3, 0})}, 3.0);
  sc.bounds = Bounds{Eigen::VectorXd::Constant(2, -0.1), Eigen::VectorXd::Constant(2, 0.1)};
  sc.start_unsafe = true;
  const auto log = run(sc);
  EXPECT_EQ(log.status, RunStatus::FailedInfeasible);
  EXPECT_EQ(log.records.back().status, FilterStatus::Infeasible);
  EXPECT_EQ(log.records.back().u_star, log.records.back().u_ref);
}

TEST(Run, PenetrationIsReported) {
  auto sc = single<PointMass>({{0, 0}, {2, 0}}, ConstantVelocity{2.0, 0}, {circle(3, 0, 1.0)}, 3.0);
  for (auto& a : sc.agents) a.filtered = false;
  const auto log = run(sc);
  EXPECT_EQ(log.status, RunStatus::FailedPenetration);
  EXPECT_LT(log.records.back().t, 1.0);
}

TEST(Run, QuadrotorHoverAtWaypoint) {
  QuadrotorState s;
  s.pos = Vec3(0, 0, 1);
  auto sc = single<Quadrotor>(s, Waypoint{Vec3(0, 0, 1), 1.0}, {}, 1.0);
  const auto log = run(sc);
  EXPECT_EQ(log.status, RunStatus::Completed);
  EXPECT_LT((log.records.back().state.head<3>() - s.pos).norm(), 1e-12);
}

TEST(MultiAgent, AntiparallelPointMasses) {
  Scenario<PointMass> sc;
  sc.params.width = 0.4;
  AgentSpec<PointMass> a, b;
  a.id = "a";
  a.initial = {{0, 0}, {0, 0}};
  a.target = Waypoint{Vec3(8, 0, 0), 1.0};
  b.id = "b";
  b.initial = {{8, 0.1}, {0, 0}};
  b.target = Waypoint{Vec3(0, 0.1, 0), 1.0};
  sc.agents = {a, b};
  sc.sim.duration = 15.0;
  const auto logs = multi_agent_run(sc);
  ASSERT_EQ(logs.size(), 2u);
  for (const auto& log : logs) expect_safe(log);

  sc.agents[1].filtered = false;
  const auto solo = multi_agent_run(sc);
  expect_safe(solo[0]);
  EXPECT_EQ(max_intervention(solo[1]), 0.0);
}

TEST(MultiAgent, FarApartNoIntervention) {
  Scenario<Unicycle> sc;
  AgentSpec<Unicycle> a, b;
  a.id = "a";
  b.id = "b";
  b.initial.x_p = 20;
  sc.agents = {a, b};
  sc.sim.duration = 1.0;
  for (const auto& log : multi_agent_run(sc)) {
    EXPECT_EQ(log.status, RunStatus::Completed);
    EXPECT_EQ(max_intervention(log), 0.0);
    EXPECT_EQ(log.obstacle_ids.size(), 1u);
  }
}

TEST(CollisionReport, Synthetic) {
  TrajectoryLog<PointMass> log;
  log.obstacle_ids = {"a", "b"};
  log.obstacle_radii = {1.0, 0.5};
  for (int k = 0; k <= 20; ++k) {
    StepRecord<PointMass> r;
    r.t = 0.1 * k;
    r.obstacles.resize(2);
    r.obstacles[0].distance = 3.0 - 0.2 * k;  // crosses 1.0 at k = 10
    r.obstacles[0].h = 1.0 - 0.1 * k;
    r.obstacles[1].distance = 2.0;
    r.obstacles[1].h = 5.0;
    log.records.push_back(r);
  }
  log.records[10].obstacles[0].distance = 0.99;
  const auto rep = collision_report(log);
  ASSERT_TRUE(rep.obstacles[0].first_violation_time);
  EXPECT_DOUBLE_EQ(*rep.obstacles[0].first_violation_time, 1.0);
  EXPECT_FALSE(rep.obstacles[1].first_violation_time);
  EXPECT_DOUBLE_EQ(rep.obstacles[1].min_margin, 1.5);
  EXPECT_TRUE(rep.violated());

  auto swapped = log;
  std::swap(swapped.obstacle_ids[0], swapped.obstacle_ids[1]);
  std::swap(swapped.obstacle_radii[0], swapped.obstacle_radii[1]);
  for (auto& r : swapped.records) std::swap(r.obstacles[0], r.obstacles[1]);
  const auto rep2 = collision_report(swapped);
  EXPECT_EQ(rep2.min_margin(), rep.min_margin());
  EXPECT_EQ(rep2.min_h(), rep.min_h());
  EXPECT_EQ(rep2.obstacles[1].first_violation_time, rep.obstacles[0].first_violation_time);

  EXPECT_THROW(collision_report(TrajectoryLog<PointMass>{}), DomainError);
}

TEST(CollisionReport, SafeLog) {
  const auto log = run(single<PointMass>({{0, 0}, {0, 1}}, ConstantVelocity{1, kPi / 2}, {circle(5, 0, 1)}, 2));
  const auto rep = collision_report(log);
  EXPECT_FALSE(rep.violated());
  EXPECT_GT(rep.min_margin(), 0.0);
}
