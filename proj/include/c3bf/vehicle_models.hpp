#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "c3bf/core.hpp"

namespace c3bf {

// ---------------------------------------------------------------------------
// Unicycle (acceleration controlled differential drive)
// ---------------------------------------------------------------------------

struct UnicycleState {
  double x_p = 0.0;
  double y_p = 0.0;
  double theta = 0.0;  // unwrapped
  double v = 0.0;
  double omega = 0.0;
};

struct UnicycleInput {
  double a = 0.0;
  double alpha = 0.0;
};

struct UnicycleParams {
  double l = 0.0;  ///< body-center offset ahead of the wheel axis [m]
  double width = 0.2;
};

inline Vec<5> unicycle_dynamics(const UnicycleState& s, const UnicycleInput& u) {
  Vec<5> d;
  d << s.v * std::cos(s.theta), s.v * std::sin(s.theta), s.omega, u.a, u.alpha;
  return d;
}

// ---------------------------------------------------------------------------
// Kinematic bicycle with small slip angle
// ---------------------------------------------------------------------------

struct BicycleState {
  double x_p = 0.0;
  double y_p = 0.0;
  double theta = 0.0;
  double v = 0.0;
};

struct BicycleInput {
  double a = 0.0;
  double beta = 0.0;  ///< slip angle at the CoM [rad]
};

struct BicycleParams {
  double l_f = 0.15;
  double l_r = 0.15;
  double width = 0.2;
  double beta_max = kPi / 6.0;
};

/// Maps a front steering angle to the CoM slip angle.
inline double slip_from_steering(double delta, const BicycleParams& p) {
  if (!(std::abs(delta) < kPi / 2.0)) {
    throw DomainError("slip_from_steering: |delta| must be below pi/2");
  }
  return std::atan(p.l_r / (p.l_f + p.l_r) * std::tan(delta));
}

/// Simplified (cos beta ~ 1, sin beta ~ beta) bicycle dynamics, affine in (a, beta).
inline Vec<4> bicycle_dynamics(const BicycleState& s, const BicycleInput& u,
                               const BicycleParams& p) {
  if (std::abs(u.beta) > p.beta_max) {
    throw DomainError("bicycle_dynamics: |beta| exceeds beta_max");
  }
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  Vec<4> d;
  d << s.v * c - s.v * u.beta * sn,
       s.v * sn + s.v * u.beta * c,
       s.v * u.beta / p.l_r,
       u.a;
  return d;
}

// ---------------------------------------------------------------------------
// Quadrotor (plus configuration, ZYX Euler angles)
// ---------------------------------------------------------------------------

inline constexpr double kDefaultGimbalEps = 1e-3;

struct EulerAngles {
  double phi = 0.0;    // roll
  double theta = 0.0;  // pitch
  double psi = 0.0;    // yaw
};

struct QuadrotorState {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  EulerAngles euler;
  Vec3 omega_body = Vec3::Zero();
};

struct QuadrotorInput {
  Vec4 f = Vec4::Zero();  // propeller thrusts f1..f4 [N]
};

struct QuadrotorParams {
  double mass = 1.0;
  Vec3 inertia_diag{0.01, 0.01, 0.02};
  double arm_length = 0.2;  // L
  double c_tau = 0.1;
  double l = 0.05;  ///< body-center offset from the base along the body z axis
  double offset_sign = 1.0;  ///< +1: offset along +z_body, -1: along -z_body
  double g = 9.81;
  double width = 0.4;
  double gimbal_eps = kDefaultGimbalEps;

  Vec3 body_offset() const { return Vec3(0.0, 0.0, offset_sign * l); }
};

/// Body-to-inertial rotation, R = Rz(psi) Ry(theta) Rx(phi).
inline Mat3 rotation_matrix(const EulerAngles& e) {
  const double cf = std::cos(e.phi), sf = std::sin(e.phi);
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  const double cp = std::cos(e.psi), sp = std::sin(e.psi);
  Mat3 r;
  r << cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf,
       sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf,
       -st,     ct * sf,                ct * cf;
  return r;
}

struct EulerRateMap {
  Mat3 W;      // euler rates -> body rates
  Mat3 W_inv;  // body rates -> euler rates
};

inline void check_gimbal(const EulerAngles& e, double eps = kDefaultGimbalEps) {
  if (!(std::abs(e.theta) < kPi / 2.0 - eps)) {
    throw GimbalError("pitch within gimbal guard of +-pi/2");
  }
}

inline EulerRateMap euler_rate_map(const EulerAngles& e, double eps = kDefaultGimbalEps) {
  check_gimbal(e, eps);
  const double cf = std::cos(e.phi), sf = std::sin(e.phi);
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  EulerRateMap m;
  m.W << 1.0, 0.0, -st,
         0.0, cf, sf * ct,
         0.0, -sf, cf * ct;
  m.W_inv << 1.0, sf * st / ct, cf * st / ct,
             0.0, cf, -sf,
             0.0, sf / ct, cf / ct;
  return m;
}

/// Mixer rows: (sum f, L(f1-f3), L(f2-f4), L c_tau (f1-f2+f3-f4)).
inline Mat<4, 4> mixer_matrix(const QuadrotorParams& p) {
  const double L = p.arm_length;
  const double k = L * p.c_tau;
  Mat<4, 4> m;
  m << 1.0, 1.0, 1.0, 1.0,
       L, 0.0, -L, 0.0,
       0.0, L, 0.0, -L,
       k, -k, k, -k;
  return m;
}

inline Vec<12> quadrotor_dynamics(const QuadrotorState& s, const QuadrotorInput& u,
                                  const QuadrotorParams& p) {
  const EulerRateMap erm = euler_rate_map(s.euler, p.gimbal_eps);
  const Mat3 R = rotation_matrix(s.euler);
  const Vec4 wrench = mixer_matrix(p) * u.f;
  const Vec3& I = p.inertia_diag;
  const Vec3& w = s.omega_body;

  const Vec3 acc = Vec3(0.0, 0.0, -p.g) + R.col(2) * (wrench(0) / p.mass);
  const Vec3 euler_rate = erm.W_inv * w;
  const Vec3 torque = -w.cross(I.cwiseProduct(w)) + wrench.tail<3>();
  const Vec3 omega_dot = torque.cwiseQuotient(I);

  Vec<12> d;
  d << s.vel, acc, euler_rate, omega_dot;
  return d;
}

// ---------------------------------------------------------------------------
// Planar point mass (double integrator)
// ---------------------------------------------------------------------------

struct PointMassState {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
};

struct PointMassParams {
  double width = 0.2;
};

inline Vec<4> point_mass_dynamics(const PointMassState& s, const Vec2& u) {
  Vec<4> d;
  d << s.vel, u;
  return d;
}

// ---------------------------------------------------------------------------
// Model traits: uniform vector view of each model for integration, logging
// and the generic filter/simulation templates.
// ---------------------------------------------------------------------------

struct Unicycle {
  static constexpr std::string_view kName = "unicycle";
  static constexpr int kStateDim = 5;
  static constexpr int kInputDim = 2;
  static constexpr int kSpaceDim = 2;
  static constexpr bool kPlanar = true;
  using State = UnicycleState;
  using Input = UnicycleInput;
  using Params = UnicycleParams;
  using StateVector = Vec<kStateDim>;
  using InputVector = Vec<kInputDim>;
  static constexpr std::array<std::string_view, kStateDim> kStateNames{"x_p", "y_p", "theta", "v",
                                                                       "omega"};
  static constexpr std::array<std::string_view, kInputDim> kInputNames{"a", "alpha"};

  static StateVector pack(const State& s) {
    StateVector x;
    x << s.x_p, s.y_p, s.theta, s.v, s.omega;
    return x;
  }
  static State unpack(const StateVector& x) { return {x(0), x(1), x(2), x(3), x(4)}; }
  static InputVector pack_input(const Input& u) { return {u.a, u.alpha}; }
  static Input unpack_input(const InputVector& u) { return {u(0), u(1)}; }
  static StateVector derivative(const State& s, const Input& u, const Params&) {
    return unicycle_dynamics(s, u);
  }
  static double width(const Params& p) { return p.width; }

  /// Body center, the point the collision cone is anchored at.
  static Vec2 reference_point(const State& s, const Params& p) {
    return {s.x_p + p.l * std::cos(s.theta), s.y_p + p.l * std::sin(s.theta)};
  }
  static Vec2 reference_velocity(const State& s, const Params& p) {
    const double c = std::cos(s.theta), sn = std::sin(s.theta);
    return {s.v * c - p.l * sn * s.omega, s.v * sn + p.l * c * s.omega};
  }
};

struct Bicycle {
  static constexpr std::string_view kName = "bicycle";
  static constexpr int kStateDim = 4;
  static constexpr int kInputDim = 2;
  static constexpr int kSpaceDim = 2;
  static constexpr bool kPlanar = true;
  using State = BicycleState;
  using Input = BicycleInput;
  using Params = BicycleParams;
  using StateVector = Vec<kStateDim>;
  using InputVector = Vec<kInputDim>;
  static constexpr std::array<std::string_view, kStateDim> kStateNames{"x_p", "y_p", "theta", "v"};
  static constexpr std::array<std::string_view, kInputDim> kInputNames{"a", "beta"};

  static StateVector pack(const State& s) {
    StateVector x;
    x << s.x_p, s.y_p, s.theta, s.v;
    return x;
  }
  static State unpack(const StateVector& x) { return {x(0), x(1), x(2), x(3)}; }
  static InputVector pack_input(const Input& u) { return {u.a, u.beta}; }
  static Input unpack_input(const InputVector& u) { return {u(0), u(1)}; }
  static StateVector derivative(const State& s, const Input& u, const Params& p) {
    return bicycle_dynamics(s, u, p);
  }
  static double width(const Params& p) { return p.width; }

  static Vec2 reference_point(const State& s, const Params&) { return {s.x_p, s.y_p}; }
  // Heading-aligned velocity; matches the approximated v_rel of the bicycle barrier.
  static Vec2 reference_velocity(const State& s, const Params&) {
    return {s.v * std::cos(s.theta), s.v * std::sin(s.theta)};
  }
};

struct Quadrotor {
  static constexpr std::string_view kName = "quadrotor";
  static constexpr int kStateDim = 12;
  static constexpr int kInputDim = 4;
  static constexpr int kSpaceDim = 3;
  static constexpr bool kPlanar = false;
  using State = QuadrotorState;
  using Input = QuadrotorInput;
  using Params = QuadrotorParams;
  using StateVector = Vec<kStateDim>;
  using InputVector = Vec<kInputDim>;
  static constexpr std::array<std::string_view, kStateDim> kStateNames{
      "x_p", "y_p", "z_p", "vx", "vy", "vz", "phi", "theta", "psi", "omega_x", "omega_y", "omega_z"};
  static constexpr std::array<std::string_view, kInputDim> kInputNames{"f1", "f2", "f3", "f4"};

  static StateVector pack(const State& s) {
    StateVector x;
    x << s.pos, s.vel, s.euler.phi, s.euler.theta, s.euler.psi, s.omega_body;
    return x;
  }
  static State unpack(const StateVector& x) {
    State s;
    s.pos = x.segment<3>(0);
    s.vel = x.segment<3>(3);
    s.euler = {x(6), x(7), x(8)};
    s.omega_body = x.segment<3>(9);
    return s;
  }
  static InputVector pack_input(const Input& u) { return u.f; }
  static Input unpack_input(const InputVector& u) { return {u}; }
  static StateVector derivative(const State& s, const Input& u, const Params& p) {
    return quadrotor_dynamics(s, u, p);
  }
  static double width(const Params& p) { return p.width; }

  static Vec3 reference_point(const State& s, const Params& p) {
    return s.pos + rotation_matrix(s.euler) * p.body_offset();
  }
  static Vec3 reference_velocity(const State& s, const Params& p) {
    return s.vel + rotation_matrix(s.euler) * s.omega_body.cross(p.body_offset());
  }
};

struct PointMass {
  static constexpr std::string_view kName = "point_mass";
  static constexpr int kStateDim = 4;
  static constexpr int kInputDim = 2;
  static constexpr int kSpaceDim = 2;
  static constexpr bool kPlanar = true;
  using State = PointMassState;
  using Input = Vec2;
  using Params = PointMassParams;
  using StateVector = Vec<kStateDim>;
  using InputVector = Vec<kInputDim>;
  static constexpr std::array<std::string_view, kStateDim> kStateNames{"x_p", "y_p", "vx", "vy"};
  static constexpr std::array<std::string_view, kInputDim> kInputNames{"ax", "ay"};

  static StateVector pack(const State& s) {
    StateVector x;
    x << s.pos, s.vel;
    return x;
  }
  static State unpack(const StateVector& x) { return {x.head<2>(), x.tail<2>()}; }
  static InputVector pack_input(const Input& u) { return u; }
  static Input unpack_input(const InputVector& u) { return u; }
  static StateVector derivative(const State& s, const Input& u, const Params&) {
    return point_mass_dynamics(s, u);
  }
  static double width(const Params& p) { return p.width; }

  static Vec2 reference_point(const State& s, const Params&) { return s.pos; }
  static Vec2 reference_velocity(const State& s, const Params&) { return s.vel; }
};

}  // namespace c3bf
