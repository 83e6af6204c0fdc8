#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "c3bf/scenario_io.hpp"

namespace c3bf {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  std::filesystem::path scenario_dir;
  /// Test hook: flips the sign of every analytic Lg h before the
  /// finite-difference comparison, which must then fail.
  bool corrupt_lgh_sign = false;
  double lipschitz_limit = 1e3;
};

/// One acceptance criterion and the checks that make it up.
struct CriterionReport {
  int id = 0;
  std::string title;
  std::vector<CheckResult> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

namespace val_detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline CheckResult make(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok, std::move(detail)};
}

// -- criterion 1 --------------------------------------------------------------

template <class Model>
CheckResult derivative_pair(const std::string& label, const BarrierKind& kind,
                            const typename Model::Params& p, SampleOptions opt, std::size_t n,
                            std::uint64_t seed, bool corrupt) {
  std::mt19937_64 rng(seed);
  opt.min_clearance = std::max(opt.min_clearance, 0.05);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = sample_configuration<Model>(rng, p, opt);
    auto e = evaluate_barrier<Model>(kind, c.state, p, c.obstacle);
    if (corrupt) e.lgh = -e.lgh;
    const double analytic = e.hdot(Model::pack_input(c.input));
    const double fd = numeric_hdot<Model>(kind, c.state, p, c.obstacle, c.input);
    worst = std::max(worst, std::abs(fd - analytic) / std::max(1.0, std::abs(analytic)));
  }
  return make("derivatives " + label, worst <= 1e-4,
              std::to_string(n) + " samples, worst relative error " + fmt(worst));
}

// -- criterion 4 --------------------------------------------------------------

inline FilterProblem random_problem(std::mt19937_64& rng, int n, int m, bool with_bounds) {
  std::uniform_real_distribution<double> d(-2, 2);
  FilterProblem p;
  p.u_ref = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) p.u_ref(i) = d(rng);
  Eigen::VectorXd inner(n);
  for (int i = 0; i < n; ++i) inner(i) = 0.5 * d(rng);
  for (int k = 0; k < m; ++k) {
    LinearConstraint c;
    c.a = Eigen::RowVectorXd(n);
    for (int i = 0; i < n; ++i) c.a(i) = d(rng);
    c.b = c.a.dot(inner.transpose()) - std::abs(d(rng));
    p.constraints.push_back(c);
  }
  if (with_bounds) p.bounds = Bounds{Eigen::VectorXd::Constant(n, -2.5), Eigen::VectorXd::Constant(n, 2.5)};
  return p;
}

// Integer normals through lattice points, u_ref on the lattice: the grid
// resolves every constraint boundary exactly.
inline FilterProblem lattice_problem(std::mt19937_64& rng, int m, double step) {
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

inline std::optional<Eigen::Vector2d> grid_search(const FilterProblem& p, double step) {
  std::optional<Eigen::Vector2d> best;
  double best_cost = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::lround(6.0 / step));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const Eigen::Vector2d u(-3 + i * step, -3 + j * step);
      bool ok = true;
      // lattice points on a boundary must not be lost to round-off in -3 + i * step
      for (const auto& c : p.constraints) ok = ok && c.a.dot(u.transpose()) >= c.b - 1e-9;
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

// -- scenario helpers -----------------------------------------------------------

struct RunSummary {
  std::string model;
  std::vector<std::string> statuses;
  bool completed = true;
  double min_h = std::numeric_limits<double>::infinity();
  double min_margin = std::numeric_limits<double>::infinity();
  double min_h0 = std::numeric_limits<double>::infinity();
  double wall = 0.0;
  std::size_t steps = 0;
};

template <class Model>
RunSummary summarize(const Scenario<Model>& sc) {
  RunSummary out;
  out.model = std::string(Model::kName);
  const auto t0 = std::chrono::steady_clock::now();
  const auto logs = run_all(sc);
  out.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& log : logs) {
    out.statuses.push_back(to_string(log.status));
    out.completed = out.completed && log.status == RunStatus::Completed;
    out.steps = std::max(out.steps, log.records.size());
    if (log.records.empty()) continue;
    const auto rep = collision_report(log);
    out.min_h = std::min(out.min_h, rep.min_h());
    out.min_margin = std::min(out.min_margin, rep.min_margin());
    for (const auto& o : log.records.front().obstacles) out.min_h0 = std::min(out.min_h0, o.h);
  }
  return out;
}

inline std::string join_statuses(const std::vector<std::string>& s) {
  std::string out;
  for (const auto& x : s) out += (out.empty() ? "" : "/") + x;
  return out;
}

template <class Model>
std::string csv_text(const Scenario<Model>& sc) {
  std::ostringstream os;
  for (const auto& log : run_all(sc)) write_csv(os, log);
  return os.str();
}

}  // namespace val_detail

// ---------------------------------------------------------------------------
// Acceptance criteria
// ---------------------------------------------------------------------------

inline CriterionReport check_derivative_suite(const ValidationOptions& opt, std::size_t n = 1000) {
  using val_detail::derivative_pair;
  CriterionReport r{1, "derivative correctness", {}};
  const bool bad = opt.corrupt_lgh_sign;
  const std::uint64_t s = opt.seed;
  UnicycleParams uni;
  uni.l = 0.3;
  const BicycleParams bi;
  const QuadrotorParams quad;
  const PointMassParams pm;
  const SampleOptions cyl{true, 0.0, 0.0};
  r.checks.push_back(derivative_pair<Unicycle>("unicycle/c3bf", BarrierKind::c3bf(), uni, {}, n, s, bad));
  r.checks.push_back(derivative_pair<Unicycle>("unicycle/hocbf", BarrierKind::hocbf(1.5), uni, {}, n, s, bad));
  r.checks.push_back(derivative_pair<Unicycle>("unicycle/ellipse", BarrierKind::ellipse(), uni, {}, n, s, bad));
  r.checks.push_back(derivative_pair<Bicycle>("bicycle/c3bf", BarrierKind::c3bf(), bi, {}, n, s, bad));
  r.checks.push_back(derivative_pair<Bicycle>("bicycle/ellipse", BarrierKind::ellipse(), bi, {}, n, s, bad));
  r.checks.push_back(derivative_pair<Quadrotor>("quadrotor/c3bf sphere", BarrierKind::c3bf(), quad, {}, n, s, bad));
  r.checks.push_back(derivative_pair<Quadrotor>("quadrotor/c3bf projection", BarrierKind::c3bf(), quad, cyl, n, s, bad));
  r.checks.push_back(derivative_pair<Quadrotor>("quadrotor/hocbf", BarrierKind::hocbf(1.5), quad, {}, n, s, bad));
  r.checks.push_back(derivative_pair<Quadrotor>("quadrotor/ellipse", BarrierKind::ellipse(), quad, {}, n, s, bad));
  r.checks.push_back(derivative_pair<PointMass>("point_mass/c3bf", BarrierKind::c3bf(), pm, {}, n, s, bad));
  r.checks.push_back(derivative_pair<PointMass>("point_mass/hocbf", BarrierKind::hocbf(1.5), pm, {}, n, s, bad));
  return r;
}

inline CriterionReport check_nondegeneracy(const ValidationOptions& opt, std::size_t n = 10000) {
  using val_detail::fmt;
  using val_detail::make;
  CriterionReport r{2, "Lg h nondegeneracy and candidate classification", {}};
  const SampleOptions moving{false, 0.0, 1e-6};
  const SampleOptions moving_cyl{true, 0.0, 1e-6};
  UnicycleParams offset;
  offset.l = 0.3;
  const auto expect = [&](const std::string& name, const DegeneracyReport& rep, Degeneracy want) {
    r.checks.push_back(make(name, rep.classification == want,
                            to_string(rep.classification) + ", min |Lg h| " + fmt(rep.min_norm)));
  };
  expect("c3bf unicycle (l=0)", lgh_degeneracy_report<Unicycle>(BarrierKind::c3bf(), n, opt.seed, {}, moving),
         Degeneracy::Nondegenerate);
  expect("c3bf unicycle (l=0.3)",
         lgh_degeneracy_report<Unicycle>(BarrierKind::c3bf(), n, opt.seed, offset, moving),
         Degeneracy::Nondegenerate);
  expect("c3bf bicycle", lgh_degeneracy_report<Bicycle>(BarrierKind::c3bf(), n, opt.seed, {}, moving),
         Degeneracy::Nondegenerate);
  expect("c3bf quadrotor sphere",
         lgh_degeneracy_report<Quadrotor>(BarrierKind::c3bf(), n, opt.seed, {}, moving),
         Degeneracy::Nondegenerate);
  expect("c3bf quadrotor projection",
         lgh_degeneracy_report<Quadrotor>(BarrierKind::c3bf(), n, opt.seed, {}, moving_cyl),
         Degeneracy::Nondegenerate);
  expect("c3bf point_mass", lgh_degeneracy_report<PointMass>(BarrierKind::c3bf(), n, opt.seed, {}, moving),
         Degeneracy::Nondegenerate);

  // rows of the candidate comparison table
  expect("ellipse unicycle: not a valid CBF",
         lgh_degeneracy_report<Unicycle>(BarrierKind::ellipse(), n, opt.seed), Degeneracy::Degenerate);
  expect("ellipse quadrotor: not a valid CBF",
         lgh_degeneracy_report<Quadrotor>(BarrierKind::ellipse(), n, opt.seed), Degeneracy::Degenerate);
  const auto eb = lgh_degeneracy_report<Bicycle>(BarrierKind::ellipse(), n, opt.seed);
  r.checks.push_back(make("ellipse bicycle: beta only, no acceleration",
                          eb.column_max_abs[0] == 0.0 && eb.column_max_abs[1] > 0.0,
                          "max |Lg h| per column: a " + fmt(eb.column_max_abs[0]) + ", beta " +
                              fmt(eb.column_max_abs[1])));
  const auto hu = lgh_degeneracy_report<Unicycle>(BarrierKind::hocbf(1.0), n, opt.seed);
  r.checks.push_back(make("hocbf unicycle (l=0): acceleration only, no steering",
                          hu.column_max_abs[0] > 0.0 && hu.column_max_abs[1] == 0.0,
                          "max |Lg h| per column: a " + fmt(hu.column_max_abs[0]) + ", alpha " +
                              fmt(hu.column_max_abs[1])));
  expect("hocbf quadrotor", lgh_degeneracy_report<Quadrotor>(BarrierKind::hocbf(1.0), n, opt.seed),
         Degeneracy::Nondegenerate);
  return r;
}

inline CriterionReport check_identities(const ValidationOptions& opt, int n = 10000) {
  using val_detail::fmt;
  using val_detail::make;
  CriterionReport r{3, "algebraic identities", {}};
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> d(-5, 5), rr(0.1, 2), gg(0.1, 4), lam(0.01, 5);

  {  // (a) C3BF minus HOCBF on full model evaluations
    double worst = 0.0;
    std::mt19937_64 srng(opt.seed + 1);
    std::uniform_real_distribution<double> gd(0.1, 4);
    for (int i = 0; i < n; ++i) {
      const double g = gd(srng);
      double lhs = 0, rhs = 0, scale = 1;
      if (i % 2 == 0) {
        const auto c = sample_configuration<PointMass>(srng, {}, {});
        const auto a = evaluate_barrier<PointMass>(BarrierKind::c3bf(), c.state, {}, c.obstacle);
        const auto b = evaluate_barrier<PointMass>(BarrierKind::hocbf(g), c.state, {}, c.obstacle);
        const auto& geo = *a.geometry;
        lhs = a.h - b.h;
        rhs = (geo.v_rel.norm() - g) * std::sqrt(geo.p_rel.squaredNorm() - geo.r * geo.r);
        scale = std::max({1.0, std::abs(a.h), std::abs(b.h)});
      } else {
        const auto c = sample_configuration<Quadrotor>(srng, {}, {});
        const auto a = evaluate_barrier<Quadrotor>(BarrierKind::c3bf(), c.state, {}, c.obstacle);
        const auto b = evaluate_barrier<Quadrotor>(BarrierKind::hocbf(g), c.state, {}, c.obstacle);
        const auto& geo = *a.geometry;
        lhs = a.h - b.h;
        rhs = (geo.v_rel.norm() - g) * std::sqrt(geo.p_rel.squaredNorm() - geo.r * geo.r);
        scale = std::max({1.0, std::abs(a.h), std::abs(b.h)});
      }
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    r.checks.push_back(make("(a) h_c3bf - h_hocbf = (|v|-gamma) sqrt(|p|^2-r^2)", worst <= 1e-12,
                            "worst scaled error " + fmt(worst)));
  }
  {  // (b) <v,v> + <p,v>|v|/s = (|v|/s) h
    double worst = 0.0;
    int k = 0;
    while (k < n) {
      const Vec2 p(d(rng), d(rng)), v(d(rng), d(rng));
      const double rad = rr(rng);
      if (p.norm() <= rad + 1e-2) continue;
      ++k;
      const double s = std::sqrt(p.squaredNorm() - rad * rad);
      const double lhs = v.dot(v) + p.dot(v) * v.norm() / s;
      const double rhs = v.norm() / s * cone_terms(p, v, rad).h;
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    r.checks.push_back(make("(b) bicycle rewrite identity", worst <= 1e-12, "worst scaled error " + fmt(worst)));
  }
  {  // (c) relative velocity on the cone edge
    double worst = 0.0;
    int k = 0;
    while (k < n) {
      const Vec2 p(d(rng), d(rng));
      const double rad = rr(rng);
      if (p.norm() <= rad + 1e-2) continue;
      ++k;
      const double pn = p.norm();
      const double c = std::sqrt(pn * pn - rad * rad) / pn, sn = rad / pn;
      const Vec2 e = p / pn, perp(-e.y(), e.x());
      const double side = (k % 2 == 0) ? 1.0 : -1.0;
      const double l = lam(rng);
      const Vec2 v = l * (-c * e + side * sn * perp);
      worst = std::max(worst, std::abs(cone_terms(p, v, rad).h) / std::max(1.0, l * pn));
    }
    r.checks.push_back(make("(c) h = 0 on the cone boundary", worst <= 1e-12, "worst scaled |h| " + fmt(worst)));
  }
  {  // (d) projector
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      const Vec3 nrm = Vec3(d(rng), d(rng), d(rng)).normalized();
      const Vec3 x(d(rng), d(rng), d(rng));
      const Mat3 P = plane_projector(nrm);
      worst = std::max({worst, (P * (P * x) - P * x).cwiseAbs().maxCoeff() / std::max(1.0, x.norm()),
                        std::abs((P * x).dot(nrm)) / std::max(1.0, x.norm())});
    }
    r.checks.push_back(make("(d) projector idempotent and in-plane", worst <= 1e-12, "worst " + fmt(worst)));
  }
  return r;
}

inline CriterionReport check_qp(const ValidationOptions& opt) {
  using namespace val_detail;
  CriterionReport r{4, "QP exactness", {}};
  std::mt19937_64 rng(opt.seed);
  {
    std::uniform_int_distribution<int> dim(1, 4), cnt(0, 4);
    double worst = 0.0;
    int optimal = 0, negative = 0;
    for (int i = 0; i < 500; ++i) {
      const auto p = random_problem(rng, dim(rng), cnt(rng), i % 2 == 0);
      const auto res = solve_active_set(p);
      if (res.status != FilterStatus::Optimal) continue;
      ++optimal;
      const auto k = kkt_residuals(p, res);
      worst = std::max({worst, k.stationarity, k.complementarity, k.primal_violation});
      if (k.min_multiplier < 0.0) ++negative;
    }
    r.checks.push_back(make("KKT residuals on 500 random problems", worst <= 1e-8 && negative == 0 && optimal > 0,
                            std::to_string(optimal) + " optimal, worst residual " + fmt(worst)));
  }
  {
    const double step = 1e-2;
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < 60; ++i) {
      const auto p = lattice_problem(rng, 1 + i % 4, step);
      const auto res = solve_active_set(p);
      const auto g = grid_search(p, step);
      if (res.status != FilterStatus::Optimal || !g) {
        ok = false;
        continue;
      }
      worst = std::max(worst, (*g - Eigen::Vector2d(res.u_star)).cwiseAbs().maxCoeff());
    }
    r.checks.push_back(make("2-input problems vs grid search (step 0.01)", ok && worst <= 2 * step,
                            "60 problems, worst |u* - u_grid| " + fmt(worst)));
  }
  {
    std::uniform_real_distribution<double> d(-2, 2);
    int unchanged = 0;
    const int total = 1000;
    for (int i = 0; i < total; ++i) {
      auto p = random_problem(rng, 1 + i % 4, i % 5, i % 3 == 0);
      for (auto& c : p.constraints) c.b = c.a.dot(p.u_ref.transpose()) - std::abs(d(rng));
      const auto res = solve_active_set(p);
      if (res.status == FilterStatus::Optimal && (res.u_star.array() == p.u_ref.array()).all()) ++unchanged;
    }
    r.checks.push_back(make("minimal intervention on feasible u_ref", unchanged == total,
                            std::to_string(unchanged) + "/" + std::to_string(total) + " returned bit-exact"));
  }
  return r;
}

inline const std::vector<std::string>& corpus_names() {
  static const std::vector<std::string> names{
      "unicycle_static_turn",    "unicycle_static_brake",    "unicycle_head_on_reverse",
      "unicycle_overtake",       "unicycle_perpendicular",   "bicycle_static_turn",
      "bicycle_static_brake",    "bicycle_head_on_reverse",  "bicycle_overtake",
      "bicycle_perpendicular",   "point_mass_head_on",       "point_mass_crossing",
      "quadrotor_static_sphere", "quadrotor_static_cylinder", "quadrotor_moving_sphere",
      "multi_obstacle",          "multi_agent"};
  return names;
}

inline CriterionReport check_corpus(const ValidationOptions& opt) {
  using namespace val_detail;
  CriterionReport r{5, "scenario corpus", {}};
  for (const auto& name : corpus_names()) {
    const auto path = opt.scenario_dir / "corpus" / (name + ".json");
    try {
      const AnyScenario any = load_scenario(path);
      std::string extra;
      bool shape_ok = std::visit(
          [&](const auto& sc) {
            bool ok = sc.sim.dt == 0.01 && sc.sim.duration <= 20.0 && !sc.start_unsafe &&
                      sc.barrier.type == BarrierType::C3BF;
            if (name == "multi_obstacle") ok = ok && sc.obstacles.size() >= 3;
            if (name == "multi_agent") {
              ok = ok && sc.agents.size() == 2;
              for (const auto& a : sc.agents) ok = ok && a.filtered;
            }
            if (name == "quadrotor_static_cylinder") {
              ok = ok && !sc.obstacles.empty() && is_cylinder(sc.obstacles.front());
            }
            return ok;
          },
          any);
      const auto s = std::visit([](const auto& sc) { return summarize(sc); }, any);
      const bool ok = shape_ok && s.completed && s.min_h0 >= 0.0 && s.min_h >= -1e-2 &&
                      s.min_margin >= -1e-3 && s.wall < 10.0;
      r.checks.push_back(make(name, ok,
                              join_statuses(s.statuses) + ", h(0) " + fmt(s.min_h0) + ", min h " +
                                  fmt(s.min_h) + ", min margin " + fmt(s.min_margin) + ", " +
                                  fmt(s.wall) + " s" + (shape_ok ? "" : ", scenario shape wrong")));
    } catch (const std::exception& e) {
      r.checks.push_back(make(name, false, e.what()));
    }
  }
  return r;
}

inline CriterionReport check_conservativeness(const ValidationOptions& opt) {
  using namespace val_detail;
  CriterionReport r{6, "HOCBF conservativeness at high approach speed", {}};
  const auto path = opt.scenario_dir / "comparison" / "high_speed.json";
  try {
    const AnyScenario any = load_scenario(path);
    std::visit(
        [&](const auto& base) {
          using Model = typename ScenarioModel<std::decay_t<decltype(base)>>::type;
          auto sc = base;
          sc.barrier = BarrierKind::c3bf();
          const auto& a = sc.agents.front();
          const auto e = evaluate_barrier<Model>(sc.barrier, a.initial, sc.params, sc.obstacles.front());
          const auto& g = *e.geometry;
          const double range = g.p_rel.norm(), speed = g.v_rel.norm();
          const double need = 4.0 * 1.0 * g.cos_phi;
          r.checks.push_back(make("geometry: range 5, r 1, approach speed >= 4 gamma cos(phi)",
                                  std::abs(range - 5.0) < 1e-9 && std::abs(g.r - 1.0) < 1e-12 && speed >= need &&
                                      g.p_rel.dot(g.v_rel) < 0.0,
                                  "range " + fmt(range) + ", r " + fmt(g.r) + ", |v_rel| " + fmt(speed) +
                                      " vs " + fmt(need)));
          const auto c3 = summarize(sc);
          r.checks.push_back(make("c3bf completes", c3.completed && c3.min_margin >= -1e-3,
                                  join_statuses(c3.statuses) + ", min margin " + fmt(c3.min_margin)));
          sc.barrier = BarrierKind::hocbf(1.0);
          const auto ho = run(sc);
          const bool failed = ho.status == RunStatus::FailedInfeasible ||
                              ho.status == RunStatus::FailedPenetration;
          r.checks.push_back(make("hocbf (gamma=1) fails", failed, to_string(ho.status) + ": " + ho.message));
        },
        any);
  } catch (const std::exception& e) {
    r.checks.push_back(make("high_speed scenario", false, e.what()));
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> gd(0.05, 5), cd(1e-3, 1.0), extra(1e-6, 10);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const double gamma = gd(rng), cphi = cd(rng), v = gamma + extra(rng);
    const auto c = hocbf_effective_angle(gamma, v, cphi);
    if (!c || !(*c < cphi)) ++bad;
  }
  r.checks.push_back(make("effective angle: cos(phi') < cos(phi) when |v_rel| > gamma", bad == 0,
                          std::to_string(bad) + "/10000 violations"));
  return r;
}

inline CriterionReport check_envelope(const ValidationOptions& opt) {
  using namespace val_detail;
  CriterionReport r{7, "violation-decay envelope", {}};
  for (const std::string name : {"unicycle_unsafe", "point_mass_unsafe", "quadrotor_unsafe"}) {
    const auto path = opt.scenario_dir / "unsafe" / (name + ".json");
    try {
      const AnyScenario any = load_scenario(path);
      std::visit(
          [&](const auto& sc) {
            const auto log = run(sc);
            double margin = std::numeric_limits<double>::infinity(), h0 = 0.0;
            for (std::size_t i = 0; i < log.obstacle_ids.size(); ++i) {
              margin = std::min(margin, decay_envelope_margin(log, i, sc.class_k.gamma));
              h0 = std::min(h0, log.records.front().obstacles[i].h);
            }
            const bool ok = sc.start_unsafe && h0 < 0.0 && log.status == RunStatus::Completed &&
                            margin >= -1e-2;
            r.checks.push_back(make(name, ok,
                                    to_string(log.status) + ", h(0) " + fmt(h0) +
                                        ", min h - h(0)exp(-gamma t) " + fmt(margin)));
          },
          any);
    } catch (const std::exception& e) {
      r.checks.push_back(make(name, false, e.what()));
    }
  }
  return r;
}

inline CriterionReport check_determinism_and_order(const ValidationOptions& opt) {
  using namespace val_detail;
  CriterionReport r{8, "determinism and RK4 order", {}};
  for (const std::string name : {"unicycle_head_on_reverse", "quadrotor_moving_sphere", "multi_agent"}) {
    try {
      const AnyScenario any = load_scenario(opt.scenario_dir / "corpus" / (name + ".json"));
      const auto a = std::visit([](const auto& sc) { return csv_text(sc); }, any);
      const auto b = std::visit([](const auto& sc) { return csv_text(sc); }, any);
      r.checks.push_back(make("byte-identical logs: " + name, a == b && !a.empty(),
                              std::to_string(a.size()) + " bytes"));
    } catch (const std::exception& e) {
      r.checks.push_back(make("byte-identical logs: " + name, false, e.what()));
    }
  }
  const auto f = [](const Vec2& x) -> Vec2 { return Vec2(x(1), -std::sin(x(0))); };
  const Vec2 x0(1.2, 0.3);
  const auto ref = [&](double dt) {
    Vec2 x = x0;
    for (int i = 0; i < 1000; ++i) x = rk4(f, x, dt / 1000);
    return x;
  };
  const double e1 = (rk4(f, x0, 0.2) - ref(0.2)).norm();
  const double e2 = (rk4(f, x0, 0.1) - ref(0.1)).norm();
  r.checks.push_back(make("RK4 one-step error ratio under dt halving", e1 / e2 >= 15.0,
                          "ratio " + fmt(e1 / e2) + " (pendulum)"));
  return r;
}

// ---------------------------------------------------------------------------
// Module invariants beyond the acceptance list
// ---------------------------------------------------------------------------

namespace val_detail {

template <class Model>
double affinity_defect(std::mt19937_64& rng, const typename Model::Params& p, int n) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto c1 = sample_configuration<Model>(rng, p, {});
    const auto c2 = sample_configuration<Model>(rng, p, {});
    const typename Model::InputVector u1 = Model::pack_input(c1.input);
    const typename Model::InputVector u2 = Model::pack_input(c2.input);
    if constexpr (std::is_same_v<Model, Bicycle>) {
      if (std::abs(u1(1) + u2(1)) > p.beta_max) continue;
    }
    const auto& s = c1.state;
    const typename Model::StateVector a =
        Model::derivative(s, Model::unpack_input(u1 + u2), p) - Model::derivative(s, c2.input, p);
    const typename Model::StateVector b =
        Model::derivative(s, c1.input, p) -
        Model::derivative(s, Model::unpack_input(Model::InputVector::Zero()), p);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
  return worst;
}

/// Largest finite-difference sensitivity |du*| / |dx| of the unbounded
/// filter along a log, skipping steps where some |Lg h| is small.
template <class Model>
double filter_sensitivity(const Scenario<Model>& sc, const TrajectoryLog<Model>& log, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const auto& agent = sc.agents.front();
  double worst = 0.0;
  for (std::size_t k = 0; k < log.records.size(); k += 10) {
    const auto& rec = log.records[k];
    bool well_posed = true;
    for (const auto& o : rec.obstacles) well_posed = well_posed && o.lgh_norm > 1e-3;
    if (!well_posed) continue;
    std::vector<Obstacle> obs;
    for (const auto& o : sc.obstacles) obs.push_back(at_time(o, rec.t));
    const auto solve = [&](const typename Model::StateVector& x) {
      const auto s = Model::unpack(x);
      const auto u_ref = Model::pack_input(reference_input<Model>(s, agent.target, agent.gains, sc.params));
      return filter<Model>(s, sc.params, obs, sc.barrier, u_ref, sc.class_k).result;
    };
    const auto base = solve(rec.state);
    if (base.status != FilterStatus::Optimal) continue;
    typename Model::StateVector dx;
    for (int i = 0; i < Model::kStateDim; ++i) dx(i) = nd(rng);
    dx *= 1e-7 / dx.norm();
    const auto pert = solve(rec.state + dx);
    if (pert.status != FilterStatus::Optimal) continue;
    worst = std::max(worst, (pert.u_star - base.u_star).norm() / dx.norm());
  }
  return worst;
}

}  // namespace val_detail

inline std::vector<CheckResult> check_module_invariants(const ValidationOptions& opt) {
  using namespace val_detail;
  std::vector<CheckResult> out;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> ang(-1.5, 1.5), yaw(-kPi, kPi);

  {
    UnicycleParams uni;
    uni.l = 0.3;
    const double w = std::max({affinity_defect<Unicycle>(rng, uni, 500), affinity_defect<Bicycle>(rng, {}, 500),
                               affinity_defect<Quadrotor>(rng, {}, 500), affinity_defect<PointMass>(rng, {}, 500)});
    out.push_back(make("vehicle_models: dynamics affine in the input", w <= 1e-12, "worst " + fmt(w)));
  }
  {
    double orth = 0.0, det = 0.0, inv = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const EulerAngles e{ang(rng), ang(rng), yaw(rng)};
      const Mat3 R = rotation_matrix(e);
      orth = std::max(orth, (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff());
      det = std::max(det, std::abs(R.determinant() - 1.0));
      const auto W = euler_rate_map(e);
      inv = std::max(inv, (W.W * W.W_inv - Mat3::Identity()).cwiseAbs().maxCoeff());
    }
    out.push_back(make("vehicle_models: rotation orthonormal, det 1", orth < 1e-12 && det <= 1e-12,
                       "|R'R-I| " + fmt(orth) + ", |det-1| " + fmt(det)));
    out.push_back(make("vehicle_models: Euler rate map inverse", inv <= 1e-10, "worst " + fmt(inv)));
  }
  {
    QuadrotorParams p;
    QuadrotorState s;
    s.vel = Vec3(0.5, -0.2, 0.1);
    const double hover = p.mass * p.g / 4.0;
    const auto d = quadrotor_dynamics(s, {Vec4::Constant(hover)}, p);
    const double rest = d.tail<9>().cwiseAbs().maxCoeff();
    out.push_back(make("vehicle_models: hover equilibrium", rest <= 1e-12 && d.head<3>() == s.vel,
                       "non-kinematic derivative " + fmt(rest)));
  }
  {
    std::uniform_real_distribution<double> c(0.1, 2), dw(0.0, 0.5);
    bool mono = true;
    for (int i = 0; i < 1000; ++i) {
      const double a = c(rng), b = c(rng), z = c(rng), w = c(rng), da = dw(rng), dwid = dw(rng);
      const double base = effective_radius(Ellipsoid{a, b, z}, w);
      mono = mono && effective_radius(Ellipsoid{a + da, b, z}, w) >= base &&
             effective_radius(Ellipsoid{a, b, z}, w + dwid) >= base &&
             effective_radius(PlanarEllipse{a, b + da}, w) >= effective_radius(PlanarEllipse{a, b}, w);
    }
    out.push_back(make("obstacles: effective radius monotone", mono, "1000 samples"));
    Obstacle o;
    Cylinder cyl;
    cyl.axis = Vec3(1, 2, 2).normalized();
    o.shape = cyl;
    o.state.velocity = plane_projector(cyl.axis) * Vec3(0.3, -1.0, 2.0);
    const double dot = std::abs(advance(o, 3.7).state.velocity.dot(cyl.axis));
    out.push_back(make("obstacles: advance keeps velocity perpendicular to axis", dot <= 1e-12, fmt(dot)));
  }
  {
    std::uniform_real_distribution<double> d(-5, 5), rr(0.1, 2), lam(0.1, 10);
    int mismatch = 0, scale_bad = 0, k = 0;
    while (k < 10000) {
      const Vec2 p(d(rng), d(rng)), v(d(rng), d(rng));
      const double rad = rr(rng);
      if (p.norm() <= rad + 1e-3 || v.norm() == 0.0) continue;
      ++k;
      const auto t = cone_terms(p, v, rad);
      const double cosang = p.dot(v) / (p.norm() * v.norm());
      if (std::abs(cosang + t.cos_phi) > 1e-9 && ((t.h >= 0) != (cosang >= -t.cos_phi))) ++mismatch;
      const double l = lam(rng);
      const double hl = cone_terms(p, Vec2(l * v), rad).h;
      if (std::abs(hl - l * t.h) > 1e-12 * std::max(1.0, std::abs(hl)) || ((hl >= 0) != (t.h >= 0) && t.h != 0)) {
        ++scale_bad;
      }
    }
    out.push_back(make("barriers: cone membership equivalence", mismatch == 0, std::to_string(mismatch) + " mismatches"));
    out.push_back(make("barriers: scale covariance in v_rel", scale_bad == 0, std::to_string(scale_bad) + " failures"));
  }
  {
    auto p = random_problem(rng, 2, 3, false);
    const auto res = solve_active_set(p);
    std::uniform_real_distribution<double> d(-3, 3);
    int feasible = 0, closer = 0;
    const double best = (res.u_star - p.u_ref).norm();
    while (feasible < 10000 && res.status == FilterStatus::Optimal) {
      const Eigen::Vector2d u(d(rng), d(rng));
      bool ok = true;
      for (const auto& c : p.constraints) ok = ok && c.a.dot(u.transpose()) >= c.b;
      if (!ok) continue;
      ++feasible;
      if ((u - p.u_ref).norm() < best - 1e-12) ++closer;
    }
    out.push_back(make("safety_filter: projection contraction", res.status == FilterStatus::Optimal && closer == 0,
                       std::to_string(closer) + " of " + std::to_string(feasible) + " feasible points closer"));
  }
  {
    const Waypoint wp{Vec3(4, -1, 2), 1.5};
    bool same = true;
    for (int i = 0; i < 200; ++i) {
      const auto c = sample_configuration<Quadrotor>(rng, {}, {});
      same = same && pd_quadrotor(c.state, wp, {}, {}).f == pd_quadrotor(c.state, wp, {}, {}).f;
      const auto u = sample_configuration<Unicycle>(rng, {}, {});
      const auto a = pd_unicycle(u.state, wp, {}), b = pd_unicycle(u.state, wp, {});
      same = same && a.a == b.a && a.alpha == b.alpha;
    }
    out.push_back(make("reference_control: memoryless", same, "400 repeated calls"));
  }

  // scenario-based invariants
  try {
    const auto any = load_scenario(opt.scenario_dir / "corpus" / "point_mass_crossing.json");
    const auto& sc = std::get<Scenario<PointMass>>(any);
    const auto log = run(sc);
    double kin = 0.0;
    for (const auto& rec : log.records) {
      for (std::size_t i = 0; i < sc.obstacles.size(); ++i) {
        const Vec3 want = sc.obstacles[i].state.center + sc.obstacles[i].state.velocity * rec.t;
        kin = std::max(kin, (rec.obstacles[i].center - want).cwiseAbs().maxCoeff());
      }
    }
    out.push_back(make("sim_engine: obstacle centers follow initial + velocity t", kin == 0.0, fmt(kin)));

    auto fine = sc;
    fine.sim.dt = sc.sim.dt / 10.0;
    const auto coarse_rep = collision_report(log);
    const auto fine_rep = collision_report(run(fine));
    const bool tighter = fine_rep.min_h() >= coarse_rep.min_h() - 1e-12 &&
                         fine_rep.min_margin() >= coarse_rep.min_margin() - 1e-12;
    out.push_back(make("sim_engine: dt refinement tightens minima", tighter,
                       "min h " + fmt(coarse_rep.min_h()) + " -> " + fmt(fine_rep.min_h()) + ", min margin " +
                           fmt(coarse_rep.min_margin()) + " -> " + fmt(fine_rep.min_margin())));

    const double L = filter_sensitivity(sc, log, rng);
    out.push_back(make("safety_filter: Lipschitz spot check along a run", L <= opt.lipschitz_limit,
                       "max |du*|/|dx| " + fmt(L) + " (limit " + fmt(opt.lipschitz_limit) + ")"));

    std::ostringstream os;
    write_csv(os, log);
    std::istringstream is(os.str());
    const auto back = read_csv<PointMass>(is);
    bool exact = back.records.size() == log.records.size();
    for (std::size_t k = 0; exact && k < log.records.size(); ++k) {
      const auto& a = log.records[k];
      const auto& b = back.records[k];
      exact = a.t == b.t && a.state == b.state && a.u_ref == b.u_ref && a.u_star == b.u_star &&
              a.status == b.status && a.active_count == b.active_count;
      for (std::size_t i = 0; exact && i < a.obstacles.size(); ++i) {
        exact = a.obstacles[i].h == b.obstacles[i].h && a.obstacles[i].distance == b.obstacles[i].distance;
      }
    }
    out.push_back(make("cli: CSV round trip is bit-exact", exact, std::to_string(log.records.size()) + " rows"));
  } catch (const std::exception& e) {
    out.push_back(make("scenario-based invariants", false, e.what()));
  }
  return out;
}

inline std::vector<CriterionReport> acceptance_suite(const ValidationOptions& opt) {
  return {check_derivative_suite(opt), check_nondegeneracy(opt), check_identities(opt),
          check_qp(opt),               check_corpus(opt),        check_conservativeness(opt),
          check_envelope(opt),         check_determinism_and_order(opt)};
}

}  // namespace c3bf
