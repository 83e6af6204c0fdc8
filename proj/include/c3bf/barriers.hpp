#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "c3bf/core.hpp"
#include "c3bf/obstacles.hpp"
#include "c3bf/vehicle_models.hpp"

namespace c3bf {

enum class BarrierType { C3BF, Ellipse, HOCBF };

struct BarrierKind {
  BarrierType type = BarrierType::C3BF;
  double gamma = 1.0;  // only read for HOCBF

  static BarrierKind c3bf() { return {BarrierType::C3BF, 1.0}; }
  static BarrierKind ellipse() { return {BarrierType::Ellipse, 1.0}; }
  static BarrierKind hocbf(double gamma) {
    if (!(gamma > 0.0)) throw DomainError("HOCBF gamma must be > 0");
    return {BarrierType::HOCBF, gamma};
  }
};

inline std::string to_string(const BarrierKind& k) {
  switch (k.type) {
    case BarrierType::C3BF: return "c3bf";
    case BarrierType::Ellipse: return "ellipse";
    case BarrierType::HOCBF: return "hocbf";
  }
  return "unknown";
}

template <int D>
struct ConeGeometry {
  Vec<D> p_rel;
  Vec<D> v_rel;
  double r = 0.0;
  double cos_phi = 0.0;
};

/// h together with its Lie derivatives: hdot = lfh + lgh * u.
template <int D, int M>
struct BarrierEval {
  double h = 0.0;
  double lfh = 0.0;
  RowVec<M> lgh = RowVec<M>::Zero();
  std::optional<ConeGeometry<D>> geometry;  // absent for the ellipse candidate
  BarrierKind kind;

  double hdot(const Vec<M>& u) const { return lfh + lgh.dot(u.transpose()); }
};

struct ConeTerms {
  double h = 0.0;
  double cos_phi = 0.0;
};

/// h = <p, v> + |v| sqrt(|p|^2 - r^2). Requires |p| > r.
template <class DP, class DV>
ConeTerms cone_terms(const Eigen::MatrixBase<DP>& p_rel, const Eigen::MatrixBase<DV>& v_rel,
                     double r) {
  const double pn = p_rel.norm();
  if (!(pn > r)) throw InsideObstacleError("relative position inside the conservative circle");
  const double s = std::sqrt(pn * pn - r * r);
  return {p_rel.dot(v_rel) + v_rel.norm() * s, s / pn};
}

/// Relative position/velocity of obstacle w.r.t. the vehicle and their time
/// derivatives, split into drift and input parts.
template <int D, int M>
struct RelativeMotion {
  Vec<D> p;  // p_rel
  Vec<D> v;  // v_rel
  Vec<D> p_dot_drift;
  Mat<D, M> p_dot_input;
  Vec<D> v_dot_drift;
  Mat<D, M> v_dot_input;
};

/// Builds (h, Lf h, Lg h) for the C3BF or square-root HOCBF candidate from the
/// relative motion by the chain rule through dh/dp_rel and dh/dv_rel.
template <int D, int M>
BarrierEval<D, M> evaluate_cone_barrier(const RelativeMotion<D, M>& rm, double r,
                                        const BarrierKind& kind) {
  const double pn = rm.p.norm();
  if (!(pn > r)) throw InsideObstacleError("relative position inside the conservative circle");
  const double s = std::sqrt(pn * pn - r * r);
  const double vn = rm.v.norm();

  BarrierEval<D, M> e;
  e.kind = kind;
  Vec<D> dh_dp;
  Vec<D> dh_dv;
  if (kind.type == BarrierType::C3BF) {
    // |v| = 0: continuous extension, the unit-velocity factor is taken as zero
    const Vec<D> v_unit = vn > 0.0 ? Vec<D>(rm.v / vn) : Vec<D>::Zero();
    e.h = rm.p.dot(rm.v) + vn * s;
    dh_dp = rm.v + (vn / s) * rm.p;
    dh_dv = rm.p + s * v_unit;
  } else if (kind.type == BarrierType::HOCBF) {
    e.h = rm.p.dot(rm.v) + kind.gamma * s;
    dh_dp = rm.v + (kind.gamma / s) * rm.p;
    dh_dv = rm.p;
  } else {
    throw UnsupportedBarrierError("evaluate_cone_barrier: ellipse candidate has no cone form");
  }
  e.lfh = dh_dp.dot(rm.p_dot_drift) + dh_dv.dot(rm.v_dot_drift);
  e.lgh = dh_dp.transpose() * rm.p_dot_input + dh_dv.transpose() * rm.v_dot_input;
  e.geometry = ConeGeometry<D>{rm.p, rm.v, r, s / pn};
  return e;
}

// ---------------------------------------------------------------------------
// Per-model relative motion
// ---------------------------------------------------------------------------

inline Vec2 planar(const Vec3& v) { return v.head<2>(); }

inline RelativeMotion<2, 2> relative_motion(const UnicycleState& s, const UnicycleParams& p,
                                            const Obstacle& o) {
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  const double l = p.l;
  RelativeMotion<2, 2> rm;
  rm.p = planar(o.state.center) - Unicycle::reference_point(s, p);
  rm.v = planar(o.state.velocity) - Unicycle::reference_velocity(s, p);
  rm.p_dot_drift = rm.v;
  rm.p_dot_input.setZero();
  rm.v_dot_drift << s.v * sn * s.omega + l * c * s.omega * s.omega,
                    -s.v * c * s.omega + l * sn * s.omega * s.omega;
  rm.v_dot_input << -c, l * sn,
                    -sn, -l * c;
  return rm;
}

inline RelativeMotion<2, 2> relative_motion(const BicycleState& s, const BicycleParams& p,
                                            const Obstacle& o) {
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  RelativeMotion<2, 2> rm;
  rm.p = planar(o.state.center) - Vec2(s.x_p, s.y_p);
  rm.v = planar(o.state.velocity) - Vec2(s.v * c, s.v * sn);
  // v_rel is the heading-aligned approximation, so p_rel also moves with beta
  rm.p_dot_drift = rm.v;
  rm.p_dot_input << 0.0, s.v * sn,
                    0.0, -s.v * c;
  rm.v_dot_drift.setZero();
  const double k = s.v * s.v / p.l_r;
  rm.v_dot_input << -c, k * sn,
                    -sn, -k * c;
  return rm;
}

inline RelativeMotion<3, 4> relative_motion(const QuadrotorState& s, const QuadrotorParams& p,
                                            const Obstacle& o) {
  check_gimbal(s.euler, p.gimbal_eps);
  const Mat3 R = rotation_matrix(s.euler);
  const Vec3 b = p.body_offset();
  const Vec3& w = s.omega_body;
  const Vec3& I = p.inertia_diag;

  RelativeMotion<3, 4> rm;
  rm.p = o.state.center - (s.pos + R * b);
  rm.v = o.state.velocity - (s.vel + R * w.cross(b));
  rm.p_dot_drift = rm.v;
  rm.p_dot_input.setZero();

  // body-center acceleration: vel_dot + R (w x (w x b)) + R (w_dot x b)
  const Vec3 w_dot_drift = (-w.cross(I.cwiseProduct(w))).cwiseQuotient(I);
  rm.v_dot_drift = Vec3(0.0, 0.0, p.g) - R * w.cross(w.cross(b)) - R * w_dot_drift.cross(b);

  const Mat<4, 4> mix = mixer_matrix(p);
  Mat<3, 4> w_dot_input = mix.bottomRows<3>();
  for (int i = 0; i < 3; ++i) w_dot_input.row(i) /= I(i);
  rm.v_dot_input = -R.col(2) * (mix.row(0) / p.mass) + R * skew(b) * w_dot_input;
  return rm;
}

inline RelativeMotion<2, 2> relative_motion(const PointMassState& s, const PointMassParams&,
                                            const Obstacle& o) {
  RelativeMotion<2, 2> rm;
  rm.p = planar(o.state.center) - s.pos;
  rm.v = planar(o.state.velocity) - s.vel;
  rm.p_dot_drift = rm.v;
  rm.p_dot_input.setZero();
  rm.v_dot_drift.setZero();
  rm.v_dot_input = -Mat<2, 2>::Identity();
  return rm;
}

/// Projector onto the plane with unit normal n: x - <x, n> n.
inline Mat3 plane_projector(const Vec3& n) { return Mat3::Identity() - n * n.transpose(); }

template <int M>
RelativeMotion<3, M> project(const RelativeMotion<3, M>& rm, const Vec3& axis) {
  const Mat3 P = plane_projector(axis);
  RelativeMotion<3, M> out;
  out.p = P * rm.p;
  out.v = P * rm.v;
  out.p_dot_drift = P * rm.p_dot_drift;
  out.p_dot_input = P * rm.p_dot_input;
  out.v_dot_drift = P * rm.v_dot_drift;
  out.v_dot_input = P * rm.v_dot_input;
  return out;
}

// ---------------------------------------------------------------------------
// Collision-cone barriers
// ---------------------------------------------------------------------------

namespace detail {

template <class Model>
void require_planar_shape(const Obstacle& o) {
  if (is_cylinder(o)) {
    throw UnsupportedBarrierError(std::string(Model::kName) + ": cylinder obstacles need a 3D model");
  }
}

}  // namespace detail

inline BarrierEval<2, 2> c3bf_unicycle(const UnicycleState& s, const UnicycleParams& p,
                                       const Obstacle& o) {
  detail::require_planar_shape<Unicycle>(o);
  return evaluate_cone_barrier(relative_motion(s, p, o), effective_radius(o.shape, p.width),
                               BarrierKind::c3bf());
}

inline BarrierEval<2, 2> c3bf_bicycle(const BicycleState& s, const BicycleParams& p,
                                      const Obstacle& o) {
  detail::require_planar_shape<Bicycle>(o);
  return evaluate_cone_barrier(relative_motion(s, p, o), effective_radius(o.shape, p.width),
                               BarrierKind::c3bf());
}

inline BarrierEval<3, 4> c3bf_quadrotor_sphere(const QuadrotorState& s, const QuadrotorParams& p,
                                               const Obstacle& o) {
  if (is_cylinder(o)) {
    throw UnsupportedBarrierError("c3bf_quadrotor_sphere: cylinder obstacle, use the projection form");
  }
  return evaluate_cone_barrier(relative_motion(s, p, o), effective_radius(o.shape, p.width),
                               BarrierKind::c3bf());
}

inline BarrierEval<3, 4> cone_barrier_quadrotor_projection(const QuadrotorState& s,
                                                           const QuadrotorParams& p,
                                                           const Obstacle& o,
                                                           const BarrierKind& kind) {
  const auto* cyl = std::get_if<Cylinder>(&o.shape);
  if (cyl == nullptr) {
    throw UnsupportedBarrierError("projection barrier requires a cylinder obstacle");
  }
  if (std::abs(cyl->axis.dot(o.state.velocity)) > kAxisTolerance) {
    throw AxisVelocityError("cylinder obstacle '" + o.id + "' moves along its axis");
  }
  return evaluate_cone_barrier(project(relative_motion(s, p, o), cyl->axis),
                               effective_radius(o.shape, p.width), kind);
}

inline BarrierEval<3, 4> c3bf_quadrotor_projection(const QuadrotorState& s,
                                                   const QuadrotorParams& p, const Obstacle& o) {
  return cone_barrier_quadrotor_projection(s, p, o, BarrierKind::c3bf());
}

inline BarrierEval<2, 2> c3bf_point_mass(const PointMassState& s, const PointMassParams& p,
                                         const Obstacle& o) {
  detail::require_planar_shape<PointMass>(o);
  return evaluate_cone_barrier(relative_motion(s, p, o), effective_radius(o.shape, p.width),
                               BarrierKind::c3bf());
}

// ---------------------------------------------------------------------------
// Ellipse candidate (diagnostic): h = sum ((c_i - x_i) / c_i)^2 - 1
// ---------------------------------------------------------------------------

namespace detail {

inline Vec2 planar_semi_axes(const Obstacle& o) {
  if (const auto* e = std::get_if<PlanarEllipse>(&o.shape)) return {e->c1, e->c2};
  if (const auto* e = std::get_if<Ellipsoid>(&o.shape)) return {e->c1, e->c2};
  throw UnsupportedBarrierError("ellipse candidate: cylinder obstacle not supported");
}

}  // namespace detail

inline BarrierEval<2, 2> ellipse_cbf(const UnicycleState& s, const UnicycleParams&,
                                     const Obstacle& o) {
  const Vec2 c = detail::planar_semi_axes(o);
  const Vec2 q = c.cwiseProduct(c).cwiseInverse();  // 1 / c_i^2
  const Vec2 p = planar(o.state.center) - Vec2(s.x_p, s.y_p);
  const Vec2 p_dot = planar(o.state.velocity) - Vec2(s.v * std::cos(s.theta), s.v * std::sin(s.theta));
  BarrierEval<2, 2> e;
  e.kind = BarrierKind::ellipse();
  e.h = p.cwiseProduct(p).dot(q) - 1.0;
  e.lfh = 2.0 * p.cwiseProduct(p_dot).dot(q);
  e.lgh.setZero();
  return e;
}

inline BarrierEval<2, 2> ellipse_cbf(const BicycleState& s, const BicycleParams&,
                                     const Obstacle& o) {
  const Vec2 c = detail::planar_semi_axes(o);
  const Vec2 q = c.cwiseProduct(c).cwiseInverse();
  const double ct = std::cos(s.theta), st = std::sin(s.theta);
  const Vec2 p = planar(o.state.center) - Vec2(s.x_p, s.y_p);
  const Vec2 p_dot = planar(o.state.velocity) - Vec2(s.v * ct, s.v * st);
  const Vec2 p_dot_beta(s.v * st, -s.v * ct);
  BarrierEval<2, 2> e;
  e.kind = BarrierKind::ellipse();
  e.h = p.cwiseProduct(p).dot(q) - 1.0;
  e.lfh = 2.0 * p.cwiseProduct(p_dot).dot(q);
  e.lgh(0) = 0.0;
  e.lgh(1) = 2.0 * p.cwiseProduct(p_dot_beta).dot(q);
  return e;
}

inline BarrierEval<3, 4> ellipse_cbf(const QuadrotorState& s, const QuadrotorParams&,
                                     const Obstacle& o) {
  const auto* el = std::get_if<Ellipsoid>(&o.shape);
  if (el == nullptr) throw UnsupportedBarrierError("quadrotor ellipse candidate needs an ellipsoid");
  const Vec3 c(el->c1, el->c2, el->c3);
  const Vec3 q = c.cwiseProduct(c).cwiseInverse();
  const Vec3 p = o.state.center - s.pos;
  const Vec3 p_dot = o.state.velocity - s.vel;
  BarrierEval<3, 4> e;
  e.kind = BarrierKind::ellipse();
  e.h = p.cwiseProduct(p).dot(q) - 1.0;
  e.lfh = 2.0 * p.cwiseProduct(p_dot).dot(q);
  e.lgh.setZero();
  return e;
}

// ---------------------------------------------------------------------------
// Square-root HOCBF baseline: h = <p, v> + gamma sqrt(|p|^2 - r^2)
// ---------------------------------------------------------------------------

inline BarrierEval<2, 2> hocbf_eval(const PointMassState& s, const PointMassParams& p,
                                    const Obstacle& o, double gamma) {
  detail::require_planar_shape<PointMass>(o);
  return evaluate_cone_barrier(relative_motion(s, p, o), effective_radius(o.shape, p.width),
                               BarrierKind::hocbf(gamma));
}

inline BarrierEval<2, 2> hocbf_eval(const UnicycleState& s, const UnicycleParams& p,
                                    const Obstacle& o, double gamma) {
  detail::require_planar_shape<Unicycle>(o);
  return evaluate_cone_barrier(relative_motion(s, p, o), effective_radius(o.shape, p.width),
                               BarrierKind::hocbf(gamma));
}

inline BarrierEval<3, 4> hocbf_eval(const QuadrotorState& s, const QuadrotorParams& p,
                                    const Obstacle& o, double gamma) {
  if (is_cylinder(o)) throw UnsupportedBarrierError("HOCBF baseline: sphere obstacles only");
  return evaluate_cone_barrier(relative_motion(s, p, o), effective_radius(o.shape, p.width),
                               BarrierKind::hocbf(gamma));
}

/// cos(phi') = (gamma / |v_rel|) cos(phi): the cone implied by the HOCBF.
/// Returns nullopt when the product exceeds 1 (no cone).
inline std::optional<double> hocbf_effective_angle(double gamma, double v_rel_norm,
                                                   double cos_phi) {
  if (!(v_rel_norm > 0.0)) throw DomainError("hocbf_effective_angle: |v_rel| must be > 0");
  const double c = gamma / v_rel_norm * cos_phi;
  if (c > 1.0) return std::nullopt;
  return c;
}

// ---------------------------------------------------------------------------
// Generic dispatch
// ---------------------------------------------------------------------------

template <class Model>
using BarrierEvalFor = BarrierEval<Model::kSpaceDim, Model::kInputDim>;

template <class Model>
BarrierEvalFor<Model> evaluate_barrier(const BarrierKind& kind, const typename Model::State& s,
                                       const typename Model::Params& p, const Obstacle& o) {
  if constexpr (std::is_same_v<Model, Quadrotor>) {
    if (kind.type == BarrierType::Ellipse) return ellipse_cbf(s, p, o);
    if (is_cylinder(o)) {
      if (kind.type == BarrierType::HOCBF) {
        throw UnsupportedBarrierError("HOCBF baseline: sphere obstacles only");
      }
      return c3bf_quadrotor_projection(s, p, o);
    }
    if (kind.type == BarrierType::HOCBF) return hocbf_eval(s, p, o, kind.gamma);
    return c3bf_quadrotor_sphere(s, p, o);
  } else if constexpr (std::is_same_v<Model, Bicycle>) {
    if (kind.type == BarrierType::Ellipse) return ellipse_cbf(s, p, o);
    if (kind.type == BarrierType::HOCBF) {
      throw UnsupportedBarrierError("HOCBF baseline is not defined for the bicycle model");
    }
    return c3bf_bicycle(s, p, o);
  } else if constexpr (std::is_same_v<Model, Unicycle>) {
    if (kind.type == BarrierType::Ellipse) return ellipse_cbf(s, p, o);
    if (kind.type == BarrierType::HOCBF) return hocbf_eval(s, p, o, kind.gamma);
    return c3bf_unicycle(s, p, o);
  } else {
    if (kind.type == BarrierType::Ellipse) {
      throw UnsupportedBarrierError("ellipse candidate is not defined for the point-mass model");
    }
    if (kind.type == BarrierType::HOCBF) return hocbf_eval(s, p, o, kind.gamma);
    return c3bf_point_mass(s, p, o);
  }
}

/// Throws UnsupportedBarrierError if `kind` cannot be evaluated for this
/// model/obstacle combination.
template <class Model>
void require_supported(const BarrierKind& kind, const Obstacle& o) {
  if constexpr (std::is_same_v<Model, Quadrotor>) {
    if (kind.type == BarrierType::Ellipse && !std::holds_alternative<Ellipsoid>(o.shape)) {
      throw UnsupportedBarrierError("quadrotor ellipse candidate needs an ellipsoid");
    }
    if (kind.type == BarrierType::HOCBF && is_cylinder(o)) {
      throw UnsupportedBarrierError("HOCBF baseline: sphere obstacles only");
    }
  } else {
    detail::require_planar_shape<Model>(o);
    if (std::is_same_v<Model, Bicycle> && kind.type == BarrierType::HOCBF) {
      throw UnsupportedBarrierError("HOCBF baseline is not defined for the bicycle model");
    }
    if (std::is_same_v<Model, PointMass> && kind.type == BarrierType::Ellipse) {
      throw UnsupportedBarrierError("ellipse candidate is not defined for the point-mass model");
    }
  }
}

/// Central difference of h along the joint vehicle/obstacle flow under a
/// constant input. Test oracle for the analytic Lie derivatives.
template <class Model>
double numeric_hdot(const BarrierKind& kind, const typename Model::State& s,
                    const typename Model::Params& p, const Obstacle& o,
                    const typename Model::Input& u, double eps = 1e-6) {
  if (!(eps > 0.0)) throw DomainError("numeric_hdot: eps must be > 0");
  const auto x = Model::pack(s);
  const auto xdot = Model::derivative(s, u, p);
  const auto h_at = [&](double tau) {
    const auto st = Model::unpack(x + tau * xdot);
    return evaluate_barrier<Model>(kind, st, p, at_time(o, tau)).h;
  };
  return (h_at(eps) - h_at(-eps)) / (2.0 * eps);
}

// ---------------------------------------------------------------------------
// Random safe configurations and the Lg h degeneracy report
// ---------------------------------------------------------------------------

struct SampleOptions {
  bool cylinder = false;      // quadrotor only: sample cylinder obstacles
  double min_clearance = 0.0;  // required |p_rel| - r
  double min_v_rel = 0.0;      // required |v_rel| (cone geometry)
};

template <class Model>
struct Configuration {
  typename Model::State state;
  Obstacle obstacle;
  typename Model::Input input;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6) v = Vec3(n(rng), n(rng), n(rng));
  return v.normalized();
}

template <class Model>
Configuration<Model> draw(std::mt19937_64& rng, const typename Model::Params& p,
                          const SampleOptions& opt) {
  Configuration<Model> c;
  auto& o = c.obstacle;
  o.id = "sample";
  if constexpr (Model::kPlanar) {
    o.shape = PlanarEllipse{uniform(rng, 0.2, 1.5), uniform(rng, 0.2, 1.5)};
    o.state.center = Vec3(uniform(rng, -8, 8), uniform(rng, -8, 8), 0.0);
    o.state.velocity = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), 0.0);
  } else {
    o.state.center = Vec3(uniform(rng, -8, 8), uniform(rng, -8, 8), uniform(rng, -8, 8));
    const Vec3 v(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
    if (opt.cylinder) {
      Cylinder cyl;
      cyl.axis = random_unit(rng);
      cyl.height = uniform(rng, 3.0, 10.0);
      cyl.radii = {uniform(rng, 0.2, 1.0), uniform(rng, 0.2, 1.0)};
      o.state.velocity = plane_projector(cyl.axis) * v;
      o.shape = cyl;
    } else {
      o.shape = Ellipsoid{uniform(rng, 0.2, 1.2), uniform(rng, 0.2, 1.2), uniform(rng, 0.2, 1.2)};
      o.state.velocity = v;
    }
  }

  if constexpr (std::is_same_v<Model, Unicycle>) {
    c.state = {uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -kPi, kPi),
               uniform(rng, -2, 2), uniform(rng, -2, 2)};
    c.input = {uniform(rng, -3, 3), uniform(rng, -3, 3)};
  } else if constexpr (std::is_same_v<Model, Bicycle>) {
    c.state = {uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -kPi, kPi),
               uniform(rng, -2, 2)};
    c.input = {uniform(rng, -3, 3), uniform(rng, -p.beta_max, p.beta_max)};
  } else if constexpr (std::is_same_v<Model, Quadrotor>) {
    c.state.pos = Vec3(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    c.state.vel = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
    c.state.euler = {uniform(rng, -0.8, 0.8), uniform(rng, -0.8, 0.8), uniform(rng, -kPi, kPi)};
    c.state.omega_body = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
    const double hover = p.mass * p.g / 4.0;
    for (int i = 0; i < 4; ++i) c.input.f(i) = uniform(rng, 0.0, 2.0 * hover);
  } else {
    c.state.pos = Vec2(uniform(rng, -5, 5), uniform(rng, -5, 5));
    c.state.vel = Vec2(uniform(rng, -2, 2), uniform(rng, -2, 2));
    c.input = Vec2(uniform(rng, -3, 3), uniform(rng, -3, 3));
  }
  return c;
}

}  // namespace detail

/// Rejection-samples a configuration whose C3BF geometry (projected for
/// cylinders) satisfies the clearance and relative-speed requirements.
template <class Model>
Configuration<Model> sample_configuration(std::mt19937_64& rng, const typename Model::Params& p,
                                          const SampleOptions& opt = {}) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    auto c = detail::draw<Model>(rng, p, opt);
    try {
      const auto e = evaluate_barrier<Model>(BarrierKind::c3bf(), c.state, p, c.obstacle);
      const auto& g = *e.geometry;
      if (g.p_rel.norm() - g.r > opt.min_clearance && g.v_rel.norm() >= opt.min_v_rel) return c;
    } catch (const InsideObstacleError&) {
    }
  }
  throw NumericError("sample_configuration: rejection sampling did not converge");
}

enum class Degeneracy { Degenerate, Nondegenerate, Mixed };

inline std::string to_string(Degeneracy d) {
  switch (d) {
    case Degeneracy::Degenerate: return "DEGENERATE";
    case Degeneracy::Nondegenerate: return "NONDEGENERATE";
    case Degeneracy::Mixed: return "MIXED";
  }
  return "UNKNOWN";
}

inline constexpr double kDegenerateNorm = 1e-10;

struct DegeneracyReport {
  std::string model;
  BarrierKind kind;
  std::size_t samples = 0;
  double min_norm = 0.0;
  double max_norm = 0.0;
  double fraction_below = 0.0;  // share of samples with |Lg h| < 1e-10
  Degeneracy classification = Degeneracy::Mixed;
  std::vector<double> column_max_abs;  // per input channel
};

template <class Model>
DegeneracyReport lgh_degeneracy_report(const BarrierKind& kind, std::size_t sample_count,
                                       std::uint64_t seed, const typename Model::Params& p = {},
                                       SampleOptions opt = {}) {
  if (sample_count == 0) throw DomainError("lgh_degeneracy_report: sample_count must be > 0");
  std::mt19937_64 rng(seed);
  DegeneracyReport rep;
  rep.model = std::string(Model::kName);
  rep.kind = kind;
  rep.samples = sample_count;
  rep.min_norm = std::numeric_limits<double>::infinity();
  rep.column_max_abs.assign(Model::kInputDim, 0.0);
  std::size_t below = 0;
  for (std::size_t i = 0; i < sample_count; ++i) {
    const auto c = sample_configuration<Model>(rng, p, opt);
    const auto e = evaluate_barrier<Model>(kind, c.state, p, c.obstacle);
    const double n = e.lgh.norm();
    rep.min_norm = std::min(rep.min_norm, n);
    rep.max_norm = std::max(rep.max_norm, n);
    if (n < kDegenerateNorm) ++below;
    for (int j = 0; j < Model::kInputDim; ++j) {
      rep.column_max_abs[j] = std::max(rep.column_max_abs[j], std::abs(e.lgh(j)));
    }
  }
  rep.fraction_below = static_cast<double>(below) / static_cast<double>(sample_count);
  if (below == sample_count) {
    rep.classification = Degeneracy::Degenerate;
  } else if (below == 0) {
    rep.classification = Degeneracy::Nondegenerate;
  } else {
    rep.classification = Degeneracy::Mixed;
  }
  return rep;
}

}  // namespace c3bf
