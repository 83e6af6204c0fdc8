#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "c3bf/barriers.hpp"
#include "c3bf/obstacles.hpp"
#include "c3bf/reference_control.hpp"
#include "c3bf/safety_filter.hpp"
#include "c3bf/vehicle_models.hpp"

namespace c3bf {

enum class Integrator { RK4, Euler };

struct SimConfig {
  double dt = 0.01;
  double duration = 10.0;
  Integrator integrator = Integrator::RK4;
  std::uint64_t seed = 0;
};

template <class Model>
struct AgentSpec {
  std::string id = "ego";
  typename Model::State initial;
  Target target = ConstantVelocity{};
  Gains gains;
  bool filtered = true;
};

/// A closed-loop run. One agent for `run`, two or more for `multi_agent_run`.
template <class Model>
struct Scenario {
  std::string label = "scenario";
  typename Model::Params params;
  std::vector<AgentSpec<Model>> agents;
  std::vector<Obstacle> obstacles;
  BarrierKind barrier = BarrierKind::c3bf();
  ClassK class_k;
  std::optional<Bounds> bounds;
  std::optional<Eigen::VectorXd> weights;
  SimConfig sim;
  bool start_unsafe = false;
};

enum class RunStatus { Completed, FailedInfeasible, FailedPenetration, FailedNumeric };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "COMPLETED";
    case RunStatus::FailedInfeasible: return "FAILED-INFEASIBLE";
    case RunStatus::FailedPenetration: return "FAILED-PENETRATION";
    case RunStatus::FailedNumeric: return "FAILED-NUMERIC";
  }
  return "UNKNOWN";
}

struct ObstacleRecord {
  double h = 0.0;
  double lfh = 0.0;
  double lgh_u = 0.0;  // Lg h * u_star
  double lgh_norm = 0.0;
  double distance = 0.0;  // |p_rel| (projected for cylinders)
  Vec3 center = Vec3::Zero();
};

template <class Model>
struct StepRecord {
  double t = 0.0;
  typename Model::StateVector state;
  typename Model::InputVector u_ref;
  typename Model::InputVector u_star;
  std::vector<ObstacleRecord> obstacles;
  FilterStatus status = FilterStatus::Optimal;
  int active_count = 0;
};

template <class Model>
struct TrajectoryLog {
  std::string label;
  std::string agent_id;
  std::vector<std::string> obstacle_ids;
  std::vector<double> obstacle_radii;
  std::vector<StepRecord<Model>> records;
  RunStatus status = RunStatus::Completed;
  std::string message;
};

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// One classical RK4 step of x' = f(x).
template <class Vector, class F>
Vector rk4(const F& f, const Vector& x, double dt) {
  const Vector k1 = f(x);
  const Vector k2 = f(Vector(x + 0.5 * dt * k1));
  const Vector k3 = f(Vector(x + 0.5 * dt * k2));
  const Vector k4 = f(Vector(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class Model>
typename Model::State integrate_step(const typename Model::State& s, const typename Model::Input& u,
                                     const typename Model::Params& p, double dt,
                                     Integrator method) {
  if (!(dt > 0.0)) throw DomainError("integrate_step: dt must be > 0");
  using SV = typename Model::StateVector;
  const auto f = [&](const SV& x) -> SV { return Model::derivative(Model::unpack(x), u, p); };
  const SV x0 = Model::pack(s);
  const SV x1 = method == Integrator::RK4 ? rk4(f, x0, dt) : SV(x0 + dt * f(x0));
  if (!x1.allFinite()) throw NumericError("integration produced a non-finite state");
  return Model::unpack(x1);
}

/// Zero-order-hold RK4 step of a vehicle model.
template <class Model>
typename Model::State rk4_step(const typename Model::State& s, const typename Model::Input& u,
                               const typename Model::Params& p, double dt) {
  return integrate_step<Model>(s, u, p, dt, Integrator::RK4);
}

// ---------------------------------------------------------------------------
// Closed loop
// ---------------------------------------------------------------------------

/// Another planar agent seen as a circular obstacle moving with its current
/// reference-point velocity.
template <class Model>
Obstacle agent_as_obstacle(const typename Model::State& s, const typename Model::Params& p,
                           const std::string& id) {
  static_assert(Model::kPlanar, "multi-agent runs are planar");
  const double radius = 0.5 * Model::width(p);
  Obstacle o;
  o.id = id;
  o.shape = PlanarEllipse{radius, radius};
  const Vec2 c = Model::reference_point(s, p);
  const Vec2 v = Model::reference_velocity(s, p);
  o.state.center = Vec3(c.x(), c.y(), 0.0);
  o.state.velocity = Vec3(v.x(), v.y(), 0.0);
  return o;
}

namespace detail {

/// Scenario bounds, intersected with the model's own input domain (the
/// bicycle slip limit).
template <class Model>
std::optional<Bounds> effective_bounds(const Scenario<Model>& sc) {
  if constexpr (std::is_same_v<Model, Bicycle>) {
    Bounds b;
    b.lo = Eigen::VectorXd::Constant(2, -std::numeric_limits<double>::infinity());
    b.hi = Eigen::VectorXd::Constant(2, std::numeric_limits<double>::infinity());
    if (sc.bounds) b = *sc.bounds;
    b.lo(1) = std::max(b.lo(1), -sc.params.beta_max);
    b.hi(1) = std::min(b.hi(1), sc.params.beta_max);
    return b;
  } else {
    return sc.bounds;
  }
}

template <class Model>
std::size_t step_count(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.duration > 0.0)) throw DomainError("dt and duration must be > 0");
  return static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
}

/// Filters one agent against `obs`, fills the record. Returns the applied input.
template <class Model>
typename Model::Input control_step(const Scenario<Model>& sc, const AgentSpec<Model>& agent,
                                   const typename Model::State& s, const std::vector<Obstacle>& obs,
                                   double t, StepRecord<Model>& rec, RunStatus& status,
                                   std::string& message) {
  const auto& p = sc.params;
  const auto u_ref_in = reference_input<Model>(s, agent.target, agent.gains, p);
  const typename Model::InputVector u_ref = Model::pack_input(u_ref_in);
  rec.t = t;
  rec.state = Model::pack(s);
  rec.u_ref = u_ref;
  rec.u_star = u_ref;
  rec.obstacles.assign(obs.size(), {});

  std::vector<BarrierEvalFor<Model>> evals;
  evals.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    evals.push_back(evaluate_barrier<Model>(sc.barrier, s, p, obs[i]));
    auto& orr = rec.obstacles[i];
    const auto& e = evals.back();
    orr.h = e.h;
    orr.lfh = e.lfh;
    orr.lgh_norm = e.lgh.norm();
    orr.center = obs[i].state.center;
    // distance is always measured on the cone geometry, whichever barrier filters
    const auto geo = e.geometry ? e : evaluate_barrier<Model>(BarrierKind::c3bf(), s, p, obs[i]);
    orr.distance = geo.geometry->p_rel.norm();
  }

  if (agent.filtered && !obs.empty()) {
    FilterProblem prob;
    prob.u_ref = u_ref;
    prob.bounds = effective_bounds(sc);
    prob.weights = sc.weights;
    for (const auto& e : evals) prob.constraints.push_back(constraint_from_barrier(e, sc.class_k));
    const FilterResult res = solve_active_set(prob);
    rec.status = res.status;
    rec.active_count = static_cast<int>(res.active_set.size());
    if (res.status == FilterStatus::Infeasible) {
      status = RunStatus::FailedInfeasible;
      message = "QP infeasible at t=" + std::to_string(t) + ", applied u_ref";
    } else {
      rec.u_star = res.u_star;
    }
  }
  for (std::size_t i = 0; i < obs.size(); ++i) {
    rec.obstacles[i].lgh_u = evals[i].lgh.dot(rec.u_star.transpose());
  }
  return Model::unpack_input(rec.u_star);
}

template <class Model>
void check_input_domain(const typename Model::Input& u, const typename Model::Params& p) {
  if constexpr (std::is_same_v<Model, Bicycle>) {
    if (std::abs(u.beta) > p.beta_max) throw DomainError("filtered beta exceeds beta_max");
  }
}

}  // namespace detail

/// Fixed-step closed loop for a single agent. Records t = 0, dt, ..., duration;
/// failures stop the run and are encoded in the log status.
template <class Model>
TrajectoryLog<Model> run(const Scenario<Model>& sc) {
  if (sc.agents.size() != 1) throw DomainError("run: scenario must have exactly one agent");
  const auto& agent = sc.agents.front();
  const std::size_t steps = detail::step_count<Model>(sc.sim);

  TrajectoryLog<Model> log;
  log.label = sc.label;
  log.agent_id = agent.id;
  for (const auto& o : sc.obstacles) {
    log.obstacle_ids.push_back(o.id);
    log.obstacle_radii.push_back(effective_radius(o.shape, Model::width(sc.params)));
  }
  log.records.reserve(steps + 1);

  auto s = agent.initial;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sc.sim.dt;
    std::vector<Obstacle> obs;
    obs.reserve(sc.obstacles.size());
    for (const auto& o : sc.obstacles) obs.push_back(at_time(o, t));

    StepRecord<Model> rec;
    typename Model::Input u;
    try {
      u = detail::control_step(sc, agent, s, obs, t, rec, log.status, log.message);
    } catch (const InsideObstacleError& e) {
      log.status = RunStatus::FailedPenetration;
      log.message = "penetration at t=" + std::to_string(t) + ": " + e.what();
      break;
    } catch (const GimbalError& e) {
      log.status = RunStatus::FailedNumeric;
      log.message = e.what();
      break;
    }
    log.records.push_back(std::move(rec));
    if (log.status != RunStatus::Completed || k == steps) break;

    try {
      detail::check_input_domain<Model>(u, sc.params);
      s = integrate_step<Model>(s, u, sc.params, sc.sim.dt, sc.sim.integrator);
    } catch (const Error& e) {
      log.status = RunStatus::FailedNumeric;
      log.message = e.what();
      break;
    }
  }
  return log;
}

/// Synchronous multi-agent loop: every agent filters against the real
/// obstacles plus all other agents at their current state.
template <class Model>
std::vector<TrajectoryLog<Model>> multi_agent_run(const Scenario<Model>& sc) {
  static_assert(Model::kPlanar, "multi-agent runs are planar");
  const std::size_t n = sc.agents.size();
  if (n < 2) throw DomainError("multi_agent_run: needs at least two agents");
  const std::size_t steps = detail::step_count<Model>(sc.sim);
  const double width = Model::width(sc.params);

  std::vector<TrajectoryLog<Model>> logs(n);
  std::vector<typename Model::State> states;
  for (std::size_t a = 0; a < n; ++a) {
    auto& log = logs[a];
    log.label = sc.label;
    log.agent_id = sc.agents[a].id;
    for (const auto& o : sc.obstacles) {
      log.obstacle_ids.push_back(o.id);
      log.obstacle_radii.push_back(effective_radius(o.shape, width));
    }
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      log.obstacle_ids.push_back(sc.agents[b].id);
      log.obstacle_radii.push_back(width);  // w/2 of the other agent + w/2 of this one
    }
    states.push_back(sc.agents[a].initial);
  }

  bool stop = false;
  for (std::size_t k = 0; k <= steps && !stop; ++k) {
    const double t = static_cast<double>(k) * sc.sim.dt;
    std::vector<Obstacle> real;
    for (const auto& o : sc.obstacles) real.push_back(at_time(o, t));

    std::vector<typename Model::Input> inputs(n);
    for (std::size_t a = 0; a < n; ++a) {
      auto obs = real;
      for (std::size_t b = 0; b < n; ++b) {
        if (b != a) obs.push_back(agent_as_obstacle<Model>(states[b], sc.params, sc.agents[b].id));
      }
      StepRecord<Model> rec;
      try {
        inputs[a] = detail::control_step(sc, sc.agents[a], states[a], obs, t, rec, logs[a].status,
                                         logs[a].message);
      } catch (const InsideObstacleError& e) {
        logs[a].status = RunStatus::FailedPenetration;
        logs[a].message = "penetration at t=" + std::to_string(t) + ": " + e.what();
        stop = true;
        continue;
      }
      logs[a].records.push_back(std::move(rec));
      if (logs[a].status != RunStatus::Completed) stop = true;
    }
    if (stop || k == steps) break;

    for (std::size_t a = 0; a < n; ++a) {
      try {
        detail::check_input_domain<Model>(inputs[a], sc.params);
        states[a] = integrate_step<Model>(states[a], inputs[a], sc.params, sc.sim.dt,
                                          sc.sim.integrator);
      } catch (const Error& e) {
        logs[a].status = RunStatus::FailedNumeric;
        logs[a].message = e.what();
        stop = true;
      }
    }
  }
  return logs;
}

// ---------------------------------------------------------------------------
// Post-run analysis
// ---------------------------------------------------------------------------

struct ObstacleCollisionSummary {
  std::string id;
  double min_margin = std::numeric_limits<double>::infinity();  // min |p_rel| - r
  double min_h = std::numeric_limits<double>::infinity();
  std::optional<double> first_violation_time;  // first t with |p_rel| < r
};

struct CollisionReport {
  std::vector<ObstacleCollisionSummary> obstacles;

  double min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles) m = std::min(m, o.min_margin);
    return m;
  }
  double min_h() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles) m = std::min(m, o.min_h);
    return m;
  }
  bool violated() const {
    return std::any_of(obstacles.begin(), obstacles.end(),
                       [](const auto& o) { return o.first_violation_time.has_value(); });
  }
};

template <class Model>
CollisionReport collision_report(const TrajectoryLog<Model>& log) {
  if (log.records.empty()) throw DomainError("collision_report: empty log");
  CollisionReport rep;
  rep.obstacles.resize(log.obstacle_ids.size());
  for (std::size_t i = 0; i < rep.obstacles.size(); ++i) rep.obstacles[i].id = log.obstacle_ids[i];
  for (const auto& rec : log.records) {
    for (std::size_t i = 0; i < rec.obstacles.size(); ++i) {
      auto& o = rep.obstacles[i];
      const double margin = rec.obstacles[i].distance - log.obstacle_radii[i];
      o.min_margin = std::min(o.min_margin, margin);
      o.min_h = std::min(o.min_h, rec.obstacles[i].h);
      if (margin < 0.0 && !o.first_violation_time) o.first_violation_time = rec.t;
    }
  }
  return rep;
}

/// min over the log of h_i(t) - h_i(0) exp(-gamma t); the continuous-time
/// guarantee under kappa(h) = gamma h says this is >= 0.
template <class Model>
double decay_envelope_margin(const TrajectoryLog<Model>& log, std::size_t obstacle, double gamma) {
  if (log.records.empty()) throw DomainError("decay_envelope_margin: empty log");
  const double h0 = log.records.front().obstacles.at(obstacle).h;
  double m = std::numeric_limits<double>::infinity();
  for (const auto& rec : log.records) {
    m = std::min(m, rec.obstacles.at(obstacle).h - h0 * std::exp(-gamma * rec.t));
  }
  return m;
}

/// Largest |u_star - u_ref| over the log.
template <class Model>
double max_intervention(const TrajectoryLog<Model>& log) {
  double m = 0.0;
  for (const auto& rec : log.records) m = std::max(m, (rec.u_star - rec.u_ref).norm());
  return m;
}

}  // namespace c3bf
