#include <gtest/gtest.h>

#include <random>

#include "c3bf/safety_filter.hpp"

using namespace c3bf;

namespace {

LinearConstraint row(std::initializer_list<double> a, double b) {
  LinearConstraint c;
  c.a = Eigen::RowVectorXd(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (double v : a) c.a(i++) = v;
  c.b = b;
  return c;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

// Brute force over a grid on [-3, 3]^2.
std::optional<Eigen::Vector2d> grid_oracle(const FilterProblem& p, double step) {
  std::optional<Eigen::Vector2d> best;
  double best_cost = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::lround(6.0 / step));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const Eigen::Vector2d u(-3 + i * step, -3 + j * step);
      bool ok = true;
      for (const auto& c : p.constraints) {
        if (c.a.dot(u.transpose()) < c.b) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      const double cost = (u - p.u_ref).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = u;
      }
    }
  }
  return best;
}

// Enumerates every candidate active set, projects u_ref onto its affine
// subspace and keeps the best feasible point.
std::optional<Eigen::VectorXd> enumeration_oracle(const FilterProblem& p) {
  std::vector<LinearConstraint> rows = p.constraints;
  const Eigen::Index n = p.u_ref.size();
  if (p.bounds) {
    for (Eigen::Index j = 0; j < n; ++j) {
      LinearConstraint lo, hi;
      lo.a = Eigen::RowVectorXd::Unit(n, j);
      lo.b = p.bounds->lo(j);
      hi.a = -Eigen::RowVectorXd::Unit(n, j);
      hi.b = -p.bounds->hi(j);
      rows.push_back(lo);
      rows.push_back(hi);
    }
  }
  const int m = static_cast<int>(rows.size());
  std::optional<Eigen::VectorXd> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) act.push_back(i);
    if (static_cast<Eigen::Index>(act.size()) > n) continue;
    Eigen::VectorXd u = p.u_ref;
    if (!act.empty()) {
      Eigen::MatrixXd A(act.size(), n);
      Eigen::VectorXd b(act.size());
      for (std::size_t k = 0; k < act.size(); ++k) {
        A.row(k) = rows[act[k]].a;
        b(k) = rows[act[k]].b;
      }
      const Eigen::MatrixXd AAt = A * A.transpose();
      if (AAt.fullPivLu().rank() < static_cast<Eigen::Index>(act.size())) continue;
      u = p.u_ref + A.transpose() * AAt.ldlt().solve(b - A * p.u_ref);
    }
    bool ok = true;
    for (const auto& r : rows) ok = ok && r.a.dot(u.transpose()) >= r.b - 1e-9;
    if (!ok) continue;
    const double cost = (u - p.u_ref).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = u;
    }
  }
  return best;
}

FilterProblem random_problem(std::mt19937_64& rng, int n, int m, bool with_bounds) {
  std::uniform_real_distribution<double> d(-2, 2);
  FilterProblem p;
  p.u_ref = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) p.u_ref(i) = d(rng);
  // a common interior point keeps most problems feasible
  Eigen::VectorXd inner(n);
  for (int i = 0; i < n; ++i) inner(i) = 0.5 * d(rng);
  for (int k = 0; k < m; ++k) {
    LinearConstraint c;
    c.a = Eigen::RowVectorXd(n);
    for (int i = 0; i < n; ++i) c.a(i) = d(rng);
    c.b = c.a.dot(inner.transpose()) - std::abs(d(rng));
    p.constraints.push_back(c);
  }
  if (with_bounds) {
    Bounds b;
    b.lo = Eigen::VectorXd::Constant(n, -2.5);
    b.hi = Eigen::VectorXd::Constant(n, 2.5);
    p.bounds = b;
  }
  return p;
}

}  // namespace

TEST(Kappa, Examples) {
  EXPECT_EQ(kappa({1.0}, -2.0), -2.0);
  EXPECT_EQ(kappa({1.0}, 0.0), 0.0);
  EXPECT_EQ(kappa({2.0}, 3.0), 6.0);
}

TEST(ConstraintFromBarrier, Example) {
  BarrierEval<2, 2> e;
  e.lgh = RowVec<2>(1, 0);
  e.lfh = 0.5;
  e.h = 1.0;
  const auto c = constraint_from_barrier(e, {1.0});
  EXPECT_EQ(c.a, Eigen::RowVectorXd(RowVec<2>(1, 0)));
  EXPECT_EQ(c.b, -1.5);
}

TEST(ConstraintFromBarrier, DegenerateRows) {
  FilterProblem p;
  p.u_ref = vec({0.3, -0.2});
  p.constraints = {row({0, 0}, -0.5)};
  auto r = solve_active_set(p);
  EXPECT_EQ(r.status, FilterStatus::Optimal);
  EXPECT_EQ(r.u_star, p.u_ref);
  p.constraints = {row({0, 0}, 0.5)};
  EXPECT_EQ(solve_active_set(p).status, FilterStatus::Infeasible);
  EXPECT_THROW(solve_single_constraint(p.u_ref, p.constraints[0]), DegenerateConstraintError);
}

TEST(SingleConstraint, Examples) {
  EXPECT_EQ(solve_single_constraint(vec({0, 0}), row({1, 0}, -1)), vec({0, 0}));
  EXPECT_EQ(solve_single_constraint(vec({0, 0}), row({1, 0}, 1)), vec({1, 0}));
  EXPECT_EQ(solve_single_constraint(vec({2, 2}), row({0, 1}, 3)), vec({2, 3}));

  FilterProblem p;
  p.u_ref = vec({0, 0});
  p.constraints = {row({1, 0}, 1)};
  const auto g = grid_oracle(p, 1e-3);
  ASSERT_TRUE(g);
  EXPECT_LE((*g - Eigen::Vector2d(1, 0)).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(ActiveSet, Examples) {
  FilterProblem p;
  p.u_ref = vec({0, 0});
  p.constraints = {row({1, 0}, 1), row({0, 1}, 1)};
  const auto r = solve_active_set(p);
  EXPECT_EQ(r.status, FilterStatus::Optimal);
  EXPECT_LT((r.u_star - vec({1, 1})).norm(), 1e-15);
  EXPECT_EQ(r.active_set, (std::vector<int>{0, 1}));
  const auto g = grid_oracle(p, 1e-2);
  EXPECT_LE((*g - Eigen::Vector2d(r.u_star)).cwiseAbs().maxCoeff(), 2e-2);

  FilterProblem q;
  q.u_ref = vec({0, 0});
  q.constraints = {row({1, 0}, 1)};
  q.bounds = Bounds{vec({-10, -10}), vec({0, 10})};
  EXPECT_EQ(solve_active_set(q).status, FilterStatus::Infeasible);

  FilterProblem c;
  c.u_ref = vec({0, 0});
  c.constraints = {row({1, 0}, 1), row({-1, 0}, 0)};
  EXPECT_EQ(solve_active_set(c).status, FilterStatus::Infeasible);
}

TEST(ActiveSet, MatchesSingleConstraint) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 500; ++i) {
    auto p = random_problem(rng, 3, 1, false);
    const auto r = solve_active_set(p);
    EXPECT_LE((r.u_star - solve_single_constraint(p.u_ref, p.constraints[0])).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(ActiveSet, KktAndEnumerationOracle) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> dim(1, 4), cnt(0, 4);
  int optimal = 0;
  for (int i = 0; i < 500; ++i) {
    const auto p = random_problem(rng, dim(rng), cnt(rng), i % 2 == 0);
    const auto r = solve_active_set(p);
    const auto oracle = enumeration_oracle(p);
    ASSERT_EQ(r.status == FilterStatus::Optimal, oracle.has_value()) << "problem " << i;
    if (r.status != FilterStatus::Optimal) continue;
    ++optimal;
    const auto k = kkt_residuals(p, r);
    EXPECT_LE(k.stationarity, 1e-8);
    EXPECT_LE(k.complementarity, 1e-8);
    EXPECT_LE(k.primal_violation, 1e-9);
    EXPECT_GE(k.min_multiplier, 0.0);
    EXPECT_LE((r.u_star - *oracle).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_GT(optimal, 400);
}

TEST(ActiveSet, InfeasibleDetected) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int i = 0; i < 200; ++i) {
    FilterProblem p;
    p.u_ref = vec({d(rng), d(rng)});
    const auto a = row({d(rng), d(rng)}, 1.0);
    auto opposite = a;
    opposite.a = -a.a;
    opposite.b = 0.0;  // a u >= 1 and a u <= 0
    p.constraints = {a, opposite};
    EXPECT_EQ(solve_active_set(p).status, FilterStatus::Infeasible);
    EXPECT_FALSE(enumeration_oracle(p).has_value());
  }
}

// Constraint lines through lattice points with small integer normals, and
// u_ref on the lattice, so that the feasible grid points resolve the
// boundary at the grid spacing.
FilterProblem lattice_problem(std::mt19937_64& rng, int m, double step) {
  std::uniform_int_distribution<int> comp(-2, 2), cell(-100, 100), off(0, 80);
  const auto lattice = [&] { return Eigen::Vector2d(cell(rng) * step, cell(rng) * step); };
  FilterProblem p;
  p.u_ref = lattice() * 2.0;
  const Eigen::Vector2d inner = lattice();
  while (static_cast<int>(p.constraints.size()) < m) {
    const int a0 = comp(rng), a1 = comp(rng);
    if (a0 == 0 && a1 == 0) continue;
    LinearConstraint c;
    c.a = Eigen::RowVectorXd(2);
    c.a << a0, a1;
    c.b = c.a.dot(inner.transpose()) - off(rng) * step;
    p.constraints.push_back(c);
  }
  return p;
}

TEST(ActiveSet, GridOracleTwoInputs) {
  std::mt19937_64 rng(24);
  const double step = 1e-2;
  for (int i = 0; i < 60; ++i) {
    const auto p = lattice_problem(rng, 1 + i % 4, step);
    const auto r = solve_active_set(p);
    ASSERT_EQ(r.status, FilterStatus::Optimal);
    const auto g = grid_oracle(p, step);
    ASSERT_TRUE(g);
    EXPECT_LE((*g - Eigen::Vector2d(r.u_star)).cwiseAbs().maxCoeff(), 2 * step)
        << "problem " << i << " u*=" << r.u_star.transpose() << " grid=" << g->transpose();
  }
}

TEST(ActiveSet, MinimalIntervention) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int i = 0; i < 1000; ++i) {
    auto p = random_problem(rng, 1 + i % 4, i % 5, i % 3 == 0);
    // move every constraint so that u_ref satisfies it
    for (auto& c : p.constraints) c.b = c.a.dot(p.u_ref.transpose()) - std::abs(d(rng));
    const auto r = solve_active_set(p);
    ASSERT_EQ(r.status, FilterStatus::Optimal);
    EXPECT_TRUE((r.u_star.array() == p.u_ref.array()).all());
    EXPECT_EQ(r.iterations, 0);
  }
}

TEST(ActiveSet, ProjectionContraction) {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> d(-3, 3);
  const auto p = random_problem(rng, 2, 3, false);
  const auto r = solve_active_set(p);
  ASSERT_EQ(r.status, FilterStatus::Optimal);
  const double best = (r.u_star - p.u_ref).norm();
  int feasible = 0;
  while (feasible < 10000) {
    const Eigen::Vector2d u(d(rng), d(rng));
    bool ok = true;
    for (const auto& c : p.constraints) ok = ok && c.a.dot(u.transpose()) >= c.b;
    if (!ok) continue;
    ++feasible;
    EXPECT_LE(best, (u - p.u_ref).norm() + 1e-12);
  }
}

TEST(ActiveSet, Weights) {
  FilterProblem p;
  p.u_ref = vec({0, 0});
  p.constraints = {row({1, 1}, 1)};
  p.weights = vec({1, 3});
  const auto r = solve_active_set(p);
  // min u1^2 + 3 u2^2 on u1 + u2 = 1: u = (3/4, 1/4)
  EXPECT_LT((r.u_star - vec({0.75, 0.25})).norm(), 1e-14);
  EXPECT_LE(kkt_residuals(p, r).stationarity, 1e-12);
  p.weights = vec({1, -1});
  EXPECT_THROW(solve_active_set(p), DomainError);
}

TEST(ActiveSet, DimensionErrors) {
  FilterProblem p;
  p.u_ref = vec({0, 0});
  p.constraints = {row({1, 0, 0}, 1)};
  EXPECT_THROW(solve_active_set(p), DomainError);
}

TEST(Filter, NoObstacles) {
  const auto out = filter<PointMass>({{0, 0}, {1, 0}}, {}, {}, BarrierKind::c3bf(), Vec2(0.3, 0.1), {});
  EXPECT_EQ(out.result.u_star, Eigen::VectorXd(Vec2(0.3, 0.1)));
  EXPECT_TRUE(out.evals.empty());
}

TEST(Filter, RecedingObstacleUntouched) {
  const Obstacle o{PlanarEllipse{1, 1}, {Vec3(5, 0, 0), Vec3(3, 0, 0)}, "r"};
  const Vec2 u_ref(0.4, -0.2);
  const auto out = filter<PointMass>({{0, 0}, {1, 0}}, {}, {o}, BarrierKind::c3bf(), u_ref, {});
  EXPECT_GT(out.evals[0].h, 1.0);
  EXPECT_EQ(out.result.u_star, Eigen::VectorXd(u_ref));
}

TEST(Filter, HeadOnPointMass) {
  PointMassParams p;
  p.width = 0.0;
  const Obstacle o{PlanarEllipse{3, 3}, {Vec3(5, 0, 0), Vec3::Zero()}, "h"};
  const auto out = filter<PointMass>({{0, 0}, {1, 0}}, p, {o}, BarrierKind::c3bf(), Vec2::Zero(), {});
  const auto& r = out.result;
  ASSERT_EQ(r.status, FilterStatus::Optimal);
  EXPECT_GT(r.u_star.norm(), 0.0);
  EXPECT_EQ(r.active_set, std::vector<int>{0});
  const auto c = constraint_from_barrier(out.evals[0], {});
  EXPECT_NEAR(c.a.dot(r.u_star.transpose()), c.b, 1e-12);

  FilterProblem prob{Eigen::VectorXd(Vec2::Zero()), {c}, std::nullopt, std::nullopt};
  const auto g = grid_oracle(prob, 1e-3);
  ASSERT_TRUE(g);
  EXPECT_LE((*g - Eigen::Vector2d(r.u_star)).cwiseAbs().maxCoeff(), 2e-3);
}
