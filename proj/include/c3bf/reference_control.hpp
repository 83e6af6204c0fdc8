#pragma once

#include <algorithm>
#include <cmath>
#include <variant>

#include "c3bf/core.hpp"
#include "c3bf/vehicle_models.hpp"

namespace c3bf {

struct ConstantVelocity {
  double speed = 0.0;    // v_des
  double heading = 0.0;  // heading_des (in the xy plane)
};

struct Waypoint {
  Vec3 point = Vec3::Zero();  // z ignored by planar models
  double speed = 0.0;         // cruise speed, reduced within 1 m of the point
};

using Target = std::variant<ConstantVelocity, Waypoint>;

struct Gains {
  double kp_v = 1.0;
  double kp_theta = 2.0;
  double kd_theta = 0.5;
  double kp_pos = 2.0;
  double kd_pos = 1.5;
  double kp_att = 20.0;
  double kd_att = 4.0;
  double max_tilt = 0.4;  // rad, quadrotor attitude command limit
};

namespace detail {

struct PlanarCommand {
  double speed;
  double heading;
};

inline PlanarCommand planar_command(const Target& t, double x, double y, double theta) {
  if (const auto* cv = std::get_if<ConstantVelocity>(&t)) return {cv->speed, cv->heading};
  const auto& wp = std::get<Waypoint>(t);
  const double dx = wp.point.x() - x, dy = wp.point.y() - y;
  const double dist = std::hypot(dx, dy);
  if (dist < 1e-9) return {0.0, theta};
  return {std::min(wp.speed, dist), std::atan2(dy, dx)};
}

}  // namespace detail

inline UnicycleInput pd_unicycle(const UnicycleState& s, const Target& t, const Gains& g) {
  const auto cmd = detail::planar_command(t, s.x_p, s.y_p, s.theta);
  return {g.kp_v * (cmd.speed - s.v),
          g.kp_theta * wrap_angle(cmd.heading - s.theta) - g.kd_theta * s.omega};
}

inline BicycleInput pd_bicycle(const BicycleState& s, const Target& t, const Gains& g,
                               const BicycleParams& p) {
  const auto cmd = detail::planar_command(t, s.x_p, s.y_p, s.theta);
  const double beta = std::clamp(g.kp_theta * wrap_angle(cmd.heading - s.theta), -p.beta_max,
                                 p.beta_max);
  return {g.kp_v * (cmd.speed - s.v), beta};
}

/// Velocity tracking for the double integrator.
inline Vec2 pd_point_mass(const PointMassState& s, const Target& t, const Gains& g) {
  Vec2 v_des;
  if (const auto* cv = std::get_if<ConstantVelocity>(&t)) {
    v_des = cv->speed * Vec2(std::cos(cv->heading), std::sin(cv->heading));
  } else {
    const auto& wp = std::get<Waypoint>(t);
    const Vec2 e = wp.point.head<2>() - s.pos;
    const double dist = e.norm();
    v_des = dist < 1e-9 ? Vec2::Zero() : Vec2(e / dist * std::min(wp.speed, dist));
  }
  return g.kp_v * (v_des - s.vel);
}

/// Collective thrust and body torques -> propeller forces (inverse mixer).
inline Vec4 wrench_to_forces(double thrust, const Vec3& torque, const QuadrotorParams& p) {
  const double L = p.arm_length;
  const double yaw = torque.z() / (2.0 * L * p.c_tau);
  const double s13 = 0.5 * thrust + yaw;  // f1 + f3
  const double s24 = 0.5 * thrust - yaw;  // f2 + f4
  const double d13 = torque.x() / L;      // f1 - f3
  const double d24 = torque.y() / L;      // f2 - f4
  return {0.5 * (s13 + d13), 0.5 * (s24 + d24), 0.5 * (s13 - d13), 0.5 * (s24 - d24)};
}

inline Vec4 forces_to_wrench(const Vec4& f, const QuadrotorParams& p) {
  return mixer_matrix(p) * f;
}

/// Cascaded PD: position/velocity -> desired acceleration -> thrust and
/// small-angle roll/pitch at zero yaw -> attitude PD torques -> mixer inverse.
inline QuadrotorInput pd_quadrotor(const QuadrotorState& s, const Target& t, const Gains& g,
                                   const QuadrotorParams& p) {
  check_gimbal(s.euler, p.gimbal_eps);
  Vec3 acc_des;
  if (const auto* cv = std::get_if<ConstantVelocity>(&t)) {
    const Vec3 v_des(cv->speed * std::cos(cv->heading), cv->speed * std::sin(cv->heading), 0.0);
    acc_des = g.kd_pos * (v_des - s.vel);
  } else {
    const auto& wp = std::get<Waypoint>(t);
    Vec3 v_cmd = (g.kp_pos / g.kd_pos) * (wp.point - s.pos);
    const double vn = v_cmd.norm();
    if (vn > wp.speed && vn > 0.0) v_cmd *= wp.speed / vn;
    acc_des = g.kd_pos * (v_cmd - s.vel);
  }

  const double psi = s.euler.psi;
  const double ax = acc_des.x(), ay = acc_des.y();
  const double theta_d =
      std::clamp((ax * std::cos(psi) + ay * std::sin(psi)) / p.g, -g.max_tilt, g.max_tilt);
  const double phi_d =
      std::clamp((ax * std::sin(psi) - ay * std::cos(psi)) / p.g, -g.max_tilt, g.max_tilt);
  const double tilt = std::cos(s.euler.phi) * std::cos(s.euler.theta);
  const double thrust = std::max(0.0, p.mass * (p.g + acc_des.z()) / std::max(tilt, 0.2));

  const Vec3 att_err(phi_d - s.euler.phi, theta_d - s.euler.theta, wrap_angle(0.0 - psi));
  const Vec3 torque =
      p.inertia_diag.cwiseProduct(g.kp_att * att_err - g.kd_att * s.omega_body);
  return {wrench_to_forces(thrust, torque, p)};
}

/// Dispatches to the reference controller of each model.
template <class Model>
typename Model::Input reference_input(const typename Model::State& s, const Target& t,
                                      const Gains& g, const typename Model::Params& p) {
  if constexpr (std::is_same_v<Model, Unicycle>) {
    return pd_unicycle(s, t, g);
  } else if constexpr (std::is_same_v<Model, Bicycle>) {
    return pd_bicycle(s, t, g, p);
  } else if constexpr (std::is_same_v<Model, Quadrotor>) {
    return pd_quadrotor(s, t, g, p);
  } else {
    return pd_point_mass(s, t, g);
  }
}

}  // namespace c3bf
