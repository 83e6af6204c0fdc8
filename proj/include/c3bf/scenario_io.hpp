#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "c3bf/sim_engine.hpp"

namespace c3bf {

/// Malformed JSON or CSV text, or an unreadable file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Missing, unknown or ill-typed key. The message starts with the key path.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Well-formed scenario that cannot be run as written.
class SemanticError : public Error {
 public:
  using Error::Error;
};

using AnyScenario =
    std::variant<Scenario<Unicycle>, Scenario<Bicycle>, Scenario<Quadrotor>, Scenario<PointMass>>;

namespace io_detail {

using json = nlohmann::json;

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline const char* type_name(const json& j) { return j.type_name(); }

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw SchemaError(path + ": expected object, got " + type_name(j));
  }
}

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<std::string_view> allowed) {
  expect_object(j, path);
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw SchemaError(join(path, k) + ": unknown key");
  }
}

inline const json& require(const json& j, const std::string& path, std::string_view key) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) throw SchemaError(join(path, key) + ": missing required key");
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path + ": expected number, got " + type_name(v));
  return v.get<double>();
}

inline double number(const json& j, const std::string& path, std::string_view key) {
  return as_number(require(j, path, key), join(path, key));
}

inline double number_or(const json& j, const std::string& path, std::string_view key,
                        double fallback) {
  const auto it = j.find(std::string(key));
  return it == j.end() ? fallback : as_number(*it, join(path, key));
}

inline std::string string(const json& j, const std::string& path, std::string_view key) {
  const auto& v = require(j, path, key);
  if (!v.is_string()) throw SchemaError(join(path, key) + ": expected string, got " + type_name(v));
  return v.get<std::string>();
}

inline bool boolean_or(const json& j, const std::string& path, std::string_view key,
                       bool fallback) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) {
    throw SchemaError(join(path, key) + ": expected boolean, got " + type_name(*it));
  }
  return it->get<bool>();
}

/// Numeric array with a length in [min_len, max_len]; missing trailing
/// entries are zero-filled up to max_len.
inline std::vector<double> numbers(const json& v, const std::string& path, std::size_t min_len,
                                   std::size_t max_len) {
  if (!v.is_array()) throw SchemaError(path + ": expected array, got " + type_name(v));
  if (v.size() < min_len || v.size() > max_len) {
    throw SchemaError(path + ": expected " + std::to_string(min_len) +
                      (min_len == max_len ? "" : "-" + std::to_string(max_len)) + " entries, got " +
                      std::to_string(v.size()));
  }
  std::vector<double> out(max_len, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = as_number(v[i], index(path, i));
  return out;
}

inline Vec3 vec3(const json& v, const std::string& path, std::size_t min_len) {
  const auto a = numbers(v, path, min_len, 3);
  return {a[0], a[1], a[2]};
}

// -- model pieces -----------------------------------------------------------

template <class Model>
typename Model::State parse_state(const json& j, const std::string& path) {
  expect_object(j, path);
  typename Model::StateVector x = Model::StateVector::Zero();
  for (const auto& [k, v] : j.items()) {
    bool found = false;
    for (int i = 0; i < Model::kStateDim; ++i) {
      if (Model::kStateNames[i] == k) {
        x(i) = as_number(v, join(path, k));
        found = true;
      }
    }
    if (!found) throw SchemaError(join(path, k) + ": unknown state component");
  }
  return Model::unpack(x);
}

inline UnicycleParams parse_params(const json& j, const std::string& path, Unicycle) {
  check_keys(j, path, {"l", "width"});
  UnicycleParams p;
  p.l = number_or(j, path, "l", p.l);
  p.width = number_or(j, path, "width", p.width);
  return p;
}

inline BicycleParams parse_params(const json& j, const std::string& path, Bicycle) {
  check_keys(j, path, {"l_f", "l_r", "width", "beta_max"});
  BicycleParams p;
  p.l_f = number_or(j, path, "l_f", p.l_f);
  p.l_r = number_or(j, path, "l_r", p.l_r);
  p.width = number_or(j, path, "width", p.width);
  p.beta_max = number_or(j, path, "beta_max", p.beta_max);
  return p;
}

inline QuadrotorParams parse_params(const json& j, const std::string& path, Quadrotor) {
  check_keys(j, path, {"mass", "inertia_diag", "arm_length", "c_tau", "l", "offset_sign", "g",
                       "width", "gimbal_eps"});
  QuadrotorParams p;
  p.mass = number_or(j, path, "mass", p.mass);
  if (j.contains("inertia_diag")) p.inertia_diag = vec3(j["inertia_diag"], join(path, "inertia_diag"), 3);
  p.arm_length = number_or(j, path, "arm_length", p.arm_length);
  p.c_tau = number_or(j, path, "c_tau", p.c_tau);
  p.l = number_or(j, path, "l", p.l);
  p.offset_sign = number_or(j, path, "offset_sign", p.offset_sign);
  p.g = number_or(j, path, "g", p.g);
  p.width = number_or(j, path, "width", p.width);
  p.gimbal_eps = number_or(j, path, "gimbal_eps", p.gimbal_eps);
  return p;
}

inline PointMassParams parse_params(const json& j, const std::string& path, PointMass) {
  check_keys(j, path, {"width"});
  PointMassParams p;
  p.width = number_or(j, path, "width", p.width);
  return p;
}

inline void check_params(const UnicycleParams& p) {
  if (!(p.width > 0.0)) throw SemanticError("params.width must be > 0");
  if (!(p.l >= 0.0)) throw SemanticError("params.l must be >= 0");
}

inline void check_params(const BicycleParams& p) {
  if (!(p.width > 0.0)) throw SemanticError("params.width must be > 0");
  if (!(p.l_f > 0.0 && p.l_r > 0.0)) throw SemanticError("params.l_f and params.l_r must be > 0");
  if (!(p.beta_max > 0.0 && p.beta_max < kPi / 2.0)) {
    throw SemanticError("params.beta_max must lie in (0, pi/2)");
  }
}

inline void check_params(const QuadrotorParams& p) {
  if (!(p.width > 0.0)) throw SemanticError("params.width must be > 0");
  if (!(p.mass > 0.0) || !(p.inertia_diag.minCoeff() > 0.0) || !(p.arm_length > 0.0) ||
      !(p.c_tau > 0.0) || !(p.g >= 0.0) || !(p.l >= 0.0) || !(p.gimbal_eps > 0.0)) {
    throw SemanticError("params: quadrotor mass, inertia, arm_length, c_tau, gimbal_eps must be > 0");
  }
  if (p.offset_sign != 1.0 && p.offset_sign != -1.0) {
    throw SemanticError("params.offset_sign must be +1 or -1");
  }
}

inline void check_params(const PointMassParams& p) {
  if (!(p.width > 0.0)) throw SemanticError("params.width must be > 0");
}

inline Target parse_target(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string type = string(j, path, "type");
  if (type == "constant_velocity") {
    check_keys(j, path, {"type", "speed", "heading"});
    return ConstantVelocity{number(j, path, "speed"), number_or(j, path, "heading", 0.0)};
  }
  if (type == "waypoint") {
    check_keys(j, path, {"type", "point", "speed"});
    Waypoint w;
    w.point = vec3(require(j, path, "point"), join(path, "point"), 2);
    w.speed = number(j, path, "speed");
    return w;
  }
  throw SchemaError(join(path, "type") + ": expected constant_velocity or waypoint, got '" + type + "'");
}

inline Gains parse_gains(const json& j, const std::string& path) {
  check_keys(j, path, {"kp_v", "kp_theta", "kd_theta", "kp_pos", "kd_pos", "kp_att", "kd_att",
                       "max_tilt"});
  Gains g;
  g.kp_v = number_or(j, path, "kp_v", g.kp_v);
  g.kp_theta = number_or(j, path, "kp_theta", g.kp_theta);
  g.kd_theta = number_or(j, path, "kd_theta", g.kd_theta);
  g.kp_pos = number_or(j, path, "kp_pos", g.kp_pos);
  g.kd_pos = number_or(j, path, "kd_pos", g.kd_pos);
  g.kp_att = number_or(j, path, "kp_att", g.kp_att);
  g.kd_att = number_or(j, path, "kd_att", g.kd_att);
  g.max_tilt = number_or(j, path, "max_tilt", g.max_tilt);
  return g;
}

template <class Model>
ObstacleShape parse_shape(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string type = string(j, path, "type");
  const bool planar = Model::kPlanar;
  const auto wrong_dim = [&] {
    return SemanticError(join(path, "type") + ": '" + type + "' obstacles need a " +
                         (planar ? "3D" : "planar") + " model, this one is " +
                         std::string(Model::kName));
  };
  if (type == "circle" || type == "ellipse") {
    if (!planar) throw wrong_dim();
    if (type == "circle") {
      check_keys(j, path, {"type", "radius"});
      const double r = number(j, path, "radius");
      return PlanarEllipse{r, r};
    }
    check_keys(j, path, {"type", "semi_axes"});
    const auto c = numbers(require(j, path, "semi_axes"), join(path, "semi_axes"), 2, 2);
    return PlanarEllipse{c[0], c[1]};
  }
  if (type == "sphere" || type == "ellipsoid" || type == "cylinder" || type == "auto") {
    if (planar) throw wrong_dim();
  } else {
    throw SchemaError(join(path, "type") +
                      ": expected circle, ellipse, sphere, ellipsoid, cylinder or auto, got '" + type +
                      "'");
  }
  if (type == "sphere") {
    check_keys(j, path, {"type", "radius"});
    const double r = number(j, path, "radius");
    return Ellipsoid{r, r, r};
  }
  if (type == "ellipsoid") {
    check_keys(j, path, {"type", "semi_axes"});
    const auto c = numbers(require(j, path, "semi_axes"), join(path, "semi_axes"), 3, 3);
    return Ellipsoid{c[0], c[1], c[2]};
  }
  if (type == "auto") {
    check_keys(j, path, {"type", "semi_axes", "ratio_threshold"});
    const auto c = numbers(require(j, path, "semi_axes"), join(path, "semi_axes"), 3, 3);
    const double ratio = number_or(j, path, "ratio_threshold", kDefaultShapeRatio);
    if (!(c[0] > 0 && c[1] > 0 && c[2] > 0)) {
      throw SemanticError(join(path, "semi_axes") + ": semi-axes must be > 0");
    }
    if (!(ratio > 1.0)) throw SemanticError(join(path, "ratio_threshold") + ": must be > 1");
    return shape_from_semi_axes(c[0], c[1], c[2], ratio);
  }
  check_keys(j, path, {"type", "axis", "height", "radii"});
  Cylinder cyl;
  const Vec3 axis = vec3(require(j, path, "axis"), join(path, "axis"), 3);
  if (!(axis.norm() > 0.0)) throw SemanticError(join(path, "axis") + ": zero axis");
  cyl.axis = axis.normalized();
  cyl.height = number(j, path, "height");
  const auto r = numbers(require(j, path, "radii"), join(path, "radii"), 2, 2);
  cyl.radii = {r[0], r[1]};
  return cyl;
}

template <class Model>
Obstacle parse_obstacle(const json& j, const std::string& path, std::size_t i) {
  check_keys(j, path, {"id", "shape", "center", "velocity"});
  Obstacle o;
  o.id = j.contains("id") ? string(j, path, "id") : "obs" + std::to_string(i);
  o.shape = parse_shape<Model>(require(j, path, "shape"), join(path, "shape"));
  const std::size_t min_len = Model::kPlanar ? 2 : 3;
  o.state.center = vec3(require(j, path, "center"), join(path, "center"), min_len);
  if (j.contains("velocity")) o.state.velocity = vec3(j["velocity"], join(path, "velocity"), min_len);
  if (Model::kPlanar && (o.state.center.z() != 0.0 || o.state.velocity.z() != 0.0)) {
    throw SemanticError(path + ": planar model " + std::string(Model::kName) +
                        " needs obstacle z = 0 and vz = 0");
  }
  return o;
}

inline BarrierKind parse_barrier(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string kind = string(j, path, "kind");
  if (kind == "hocbf") {
    check_keys(j, path, {"kind", "gamma"});
    const double g = number(j, path, "gamma");
    if (!(g > 0.0)) throw SemanticError(join(path, "gamma") + ": must be > 0");
    return BarrierKind::hocbf(g);
  }
  check_keys(j, path, {"kind"});
  if (kind == "c3bf") return BarrierKind::c3bf();
  if (kind == "ellipse") return BarrierKind::ellipse();
  throw SchemaError(join(path, "kind") + ": expected c3bf, hocbf or ellipse, got '" + kind + "'");
}

template <class Model>
Bounds parse_bounds(const json& j, const std::string& path) {
  check_keys(j, path, {"lo", "hi"});
  constexpr double inf = std::numeric_limits<double>::infinity();
  Bounds b;
  b.lo = Eigen::VectorXd::Constant(Model::kInputDim, -inf);
  b.hi = Eigen::VectorXd::Constant(Model::kInputDim, inf);
  const auto side = [&](std::string_view key, Eigen::VectorXd& out) {
    if (!j.contains(std::string(key))) return;
    const auto& v = j[std::string(key)];
    const std::string p = join(path, key);
    if (!v.is_array() || v.size() != static_cast<std::size_t>(Model::kInputDim)) {
      throw SchemaError(p + ": expected array of " + std::to_string(Model::kInputDim) +
                        " numbers or nulls");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_null()) out(static_cast<Eigen::Index>(i)) = as_number(v[i], index(p, i));
    }
  };
  side("lo", b.lo);
  side("hi", b.hi);
  return b;
}

inline SimConfig parse_sim(const json& j, const std::string& path) {
  check_keys(j, path, {"dt", "duration", "seed", "integrator"});
  SimConfig c;
  c.dt = number_or(j, path, "dt", c.dt);
  c.duration = number_or(j, path, "duration", c.duration);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw SchemaError(join(path, "seed") + ": expected non-negative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("integrator")) {
    const std::string s = string(j, path, "integrator");
    if (s == "rk4") {
      c.integrator = Integrator::RK4;
    } else if (s == "euler") {
      c.integrator = Integrator::Euler;
    } else {
      throw SchemaError(join(path, "integrator") + ": expected rk4 or euler, got '" + s + "'");
    }
  }
  return c;
}

template <class Model>
Scenario<Model> parse_model_scenario(const json& j, const std::string& default_label) {
  Scenario<Model> sc;
  sc.label = j.contains("label") ? string(j, "", "label") : default_label;
  if (j.contains("params")) sc.params = parse_params(j["params"], "params", Model{});

  Target target = ConstantVelocity{};
  Gains gains;
  if (j.contains("target")) target = parse_target(j["target"], "target");
  if (j.contains("gains")) gains = parse_gains(j["gains"], "gains");

  const bool has_initial = j.contains("initial_state");
  const bool has_agents = j.contains("agents");
  if (has_initial == has_agents) {
    throw SchemaError("initial_state: exactly one of initial_state or agents is required");
  }
  if (has_initial) {
    if (!j.contains("target")) throw SchemaError("target: missing required key");
    AgentSpec<Model> a;
    a.initial = parse_state<Model>(j["initial_state"], "initial_state");
    a.target = target;
    a.gains = gains;
    sc.agents.push_back(a);
  } else {
    const auto& arr = j["agents"];
    if (!arr.is_array() || arr.empty()) throw SchemaError("agents: expected non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = index("agents", i);
      check_keys(arr[i], p, {"id", "initial_state", "target", "gains", "filtered"});
      AgentSpec<Model> a;
      a.id = arr[i].contains("id") ? string(arr[i], p, "id") : "agent" + std::to_string(i);
      a.initial = parse_state<Model>(require(arr[i], p, "initial_state"), join(p, "initial_state"));
      if (arr[i].contains("target")) {
        a.target = parse_target(arr[i]["target"], join(p, "target"));
      } else if (j.contains("target")) {
        a.target = target;
      } else {
        throw SchemaError(join(p, "target") + ": missing required key");
      }
      a.gains = arr[i].contains("gains") ? parse_gains(arr[i]["gains"], join(p, "gains")) : gains;
      a.filtered = boolean_or(arr[i], p, "filtered", true);
      sc.agents.push_back(a);
    }
  }

  if (j.contains("obstacles")) {
    const auto& arr = j["obstacles"];
    if (!arr.is_array()) throw SchemaError("obstacles: expected array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      sc.obstacles.push_back(parse_obstacle<Model>(arr[i], index("obstacles", i), i));
    }
  }

  sc.barrier = parse_barrier(require(j, "", "barrier"), "barrier");
  if (j.contains("class_k")) {
    check_keys(j["class_k"], "class_k", {"gamma"});
    sc.class_k.gamma = number(j["class_k"], "class_k", "gamma");
  }
  if (j.contains("bounds")) sc.bounds = parse_bounds<Model>(j["bounds"], "bounds");
  if (j.contains("weights")) {
    const auto w = numbers(j["weights"], "weights", Model::kInputDim, Model::kInputDim);
    sc.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  if (j.contains("sim")) sc.sim = parse_sim(j["sim"], "sim");
  if (j.contains("flags")) {
    check_keys(j["flags"], "flags", {"start_unsafe"});
    sc.start_unsafe = boolean_or(j["flags"], "flags", "start_unsafe", false);
  }
  return sc;
}

}  // namespace io_detail

/// Semantic checks shared by the parser and by callers that modify a parsed
/// scenario. With `require_safe_start`, h(0) < 0 is rejected unless the
/// scenario carries the start_unsafe flag.
template <class Model>
void validate_scenario(const Scenario<Model>& sc, bool require_safe_start = true) {
  io_detail::check_params(sc.params);
  if (sc.agents.empty()) throw SemanticError("scenario has no agent");
  if (sc.agents.size() > 1 && !Model::kPlanar) {
    throw SemanticError("multi-agent scenarios need a planar model");
  }
  if (!(sc.sim.dt > 0.0)) throw SemanticError("sim.dt must be > 0");
  if (!(sc.sim.duration > 0.0)) throw SemanticError("sim.duration must be > 0");
  if (!(sc.sim.dt <= sc.sim.duration)) throw SemanticError("sim.dt exceeds sim.duration");
  if (!(sc.class_k.gamma > 0.0)) throw SemanticError("class_k.gamma must be > 0");
  if (sc.bounds) {
    for (Eigen::Index i = 0; i < sc.bounds->lo.size(); ++i) {
      if (!(sc.bounds->lo(i) <= sc.bounds->hi(i))) {
        throw SemanticError("bounds: lo > hi for input " + std::string(Model::kInputNames[i]));
      }
    }
  }
  if (sc.weights && !(sc.weights->minCoeff() > 0.0)) throw SemanticError("weights must be > 0");

  for (const auto& o : sc.obstacles) {
    try {
      validate_obstacle(o);
      require_supported<Model>(sc.barrier, o);
    } catch (const SemanticError&) {
      throw;
    } catch (const Error& e) {
      throw SemanticError(std::string("obstacle '") + o.id + "': " + e.what());
    }
  }

  for (std::size_t a = 0; a < sc.agents.size(); ++a) {
    const auto& ag = sc.agents[a];
    if (!Model::pack(ag.initial).allFinite()) {
      throw SemanticError("agent '" + ag.id + "': non-finite initial state");
    }
    if constexpr (std::is_same_v<Model, Quadrotor>) {
      try {
        check_gimbal(ag.initial.euler, sc.params.gimbal_eps);
      } catch (const GimbalError& e) {
        throw SemanticError("agent '" + ag.id + "': " + e.what());
      }
    }
    std::vector<Obstacle> obs = sc.obstacles;
    if constexpr (Model::kPlanar) {
      for (std::size_t b = 0; b < sc.agents.size(); ++b) {
        if (b != a) {
          obs.push_back(agent_as_obstacle<Model>(sc.agents[b].initial, sc.params, sc.agents[b].id));
        }
      }
    }
    for (const auto& o : obs) {
      double h = 0.0;
      try {
        h = evaluate_barrier<Model>(sc.barrier, ag.initial, sc.params, o).h;
      } catch (const InsideObstacleError&) {
        throw SemanticError("agent '" + ag.id + "' starts inside obstacle '" + o.id + "'");
      } catch (const Error& e) {
        throw SemanticError("agent '" + ag.id + "', obstacle '" + o.id + "': " + e.what());
      }
      if (require_safe_start && h < 0.0 && !sc.start_unsafe) {
        throw SemanticError("agent '" + ag.id + "' starts with h < 0 against '" + o.id +
                            "' (set flags.start_unsafe to allow)");
      }
    }
  }
}

/// Builds and validates a scenario from a parsed JSON document.
inline AnyScenario parse_scenario(const nlohmann::json& j, const std::string& default_label = "scenario") {
  using namespace io_detail;
  check_keys(j, "", {"label", "model", "params", "initial_state", "agents", "obstacles", "barrier",
                     "class_k", "target", "gains", "bounds", "weights", "sim", "flags"});
  const std::string model = string(j, "", "model");
  const auto build = [&](auto tag) -> AnyScenario {
    using Model = decltype(tag);
    auto sc = parse_model_scenario<Model>(j, default_label);
    validate_scenario(sc);
    return sc;
  };
  if (model == "unicycle") return build(Unicycle{});
  if (model == "bicycle") return build(Bicycle{});
  if (model == "quadrotor") return build(Quadrotor{});
  if (model == "point_mass") return build(PointMass{});
  throw SchemaError("model: expected unicycle, bicycle, quadrotor or point_mass, got '" + model + "'");
}

inline AnyScenario parse_scenario_text(std::string_view text,
                                       const std::string& default_label = "scenario") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(j, default_label);
}

inline AnyScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario_text(ss.str(), path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

template <class S>
struct ScenarioModel;
template <class M>
struct ScenarioModel<Scenario<M>> {
  using type = M;
};

inline std::string_view model_name(const AnyScenario& sc) {
  return std::visit(
      [](const auto& s) { return ScenarioModel<std::decay_t<decltype(s)>>::type::kName; }, sc);
}

/// One log per agent: `run` for a single agent, `multi_agent_run` otherwise.
template <class Model>
std::vector<TrajectoryLog<Model>> run_all(const Scenario<Model>& sc) {
  if constexpr (Model::kPlanar) {
    if (sc.agents.size() > 1) return multi_agent_run(sc);
  }
  return {run(sc)};
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

template <class Model>
std::vector<std::string> csv_header(std::size_t obstacle_count) {
  std::vector<std::string> h{"t"};
  for (auto n : Model::kStateNames) h.emplace_back(n);
  for (auto n : Model::kInputNames) h.push_back("u_ref_" + std::string(n));
  for (auto n : Model::kInputNames) h.push_back("u_star_" + std::string(n));
  for (std::size_t i = 0; i < obstacle_count; ++i) {
    h.push_back("h_" + std::to_string(i));
    h.push_back("dist_" + std::to_string(i));
  }
  h.emplace_back("filter_status");
  h.emplace_back("active_count");
  return h;
}

template <class Model>
void write_csv(std::ostream& out, const TrajectoryLog<Model>& log) {
  const std::size_t n_obs = log.obstacle_ids.size();
  const auto header = csv_header<Model>(n_obs);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : log.records) {
    if (r.obstacles.size() != n_obs) throw DomainError("write_csv: obstacle count changes within log");
    out << format_double(r.t);
    for (int i = 0; i < Model::kStateDim; ++i) out << ',' << format_double(r.state(i));
    for (int i = 0; i < Model::kInputDim; ++i) out << ',' << format_double(r.u_ref(i));
    for (int i = 0; i < Model::kInputDim; ++i) out << ',' << format_double(r.u_star(i));
    for (const auto& o : r.obstacles) out << ',' << format_double(o.h) << ',' << format_double(o.distance);
    out << ',' << to_string(r.status) << ',' << r.active_count << '\n';
  }
}

template <class Model>
void write_csv_file(const std::filesystem::path& path, const TrajectoryLog<Model>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(out, log);
  if (!out) throw Error("write failed: " + path.string());
}

namespace io_detail {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    f.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return f;
}

}  // namespace io_detail

/// Reads a CSV produced by write_csv. Obstacle ids are not stored in the
/// file and come back as their column indices; radii are not recovered.
template <class Model>
TrajectoryLog<Model> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV");
  const auto head = io_detail::split(line);
  const std::size_t fixed = 1 + Model::kStateDim + 2 * Model::kInputDim + 2;
  if (head.size() < fixed || (head.size() - fixed) % 2 != 0) {
    throw ParseError("CSV header has " + std::to_string(head.size()) + " columns");
  }
  const std::size_t n_obs = (head.size() - fixed) / 2;
  const auto expected = csv_header<Model>(n_obs);
  for (std::size_t i = 0; i < head.size(); ++i) {
    if (head[i] != expected[i]) {
      throw ParseError("CSV column " + std::to_string(i) + ": expected '" + expected[i] + "', got '" +
                       std::string(head[i]) + "'");
    }
  }

  TrajectoryLog<Model> log;
  for (std::size_t i = 0; i < n_obs; ++i) log.obstacle_ids.push_back(std::to_string(i));
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const auto f = io_detail::split(line);
    if (f.size() != head.size()) {
      throw ParseError("CSV row " + std::to_string(row) + ": expected " + std::to_string(head.size()) +
                       " fields, got " + std::to_string(f.size()));
    }
    StepRecord<Model> r;
    std::size_t c = 0;
    r.t = parse_double(f[c++]);
    for (int i = 0; i < Model::kStateDim; ++i) r.state(i) = parse_double(f[c++]);
    for (int i = 0; i < Model::kInputDim; ++i) r.u_ref(i) = parse_double(f[c++]);
    for (int i = 0; i < Model::kInputDim; ++i) r.u_star(i) = parse_double(f[c++]);
    r.obstacles.resize(n_obs);
    for (auto& o : r.obstacles) {
      o.h = parse_double(f[c++]);
      o.distance = parse_double(f[c++]);
    }
    const auto st = f[c++];
    if (st == "OPTIMAL") {
      r.status = FilterStatus::Optimal;
    } else if (st == "INFEASIBLE") {
      r.status = FilterStatus::Infeasible;
    } else {
      throw ParseError("CSV row " + std::to_string(row) + ": bad filter_status '" + std::string(st) + "'");
    }
    const auto ac = f[c++];
    const auto [ptr, ec] = std::from_chars(ac.data(), ac.data() + ac.size(), r.active_count);
    if (ec != std::errc() || ptr != ac.data() + ac.size()) {
      throw ParseError("CSV row " + std::to_string(row) + ": bad active_count");
    }
    log.records.push_back(std::move(r));
  }
  return log;
}

}  // namespace c3bf
