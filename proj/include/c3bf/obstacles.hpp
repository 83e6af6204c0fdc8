#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <variant>

#include "c3bf/core.hpp"

namespace c3bf {

struct PlanarEllipse {
  double c1 = 1.0;
  double c2 = 1.0;
};

struct Ellipsoid {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
};

/// Elongated obstacle: `height` along `axis`, elliptic cross-section `radii`.
struct Cylinder {
  Vec3 axis = Vec3::UnitZ();
  double height = 1.0;
  std::array<double, 2> radii{1.0, 1.0};
};

using ObstacleShape = std::variant<PlanarEllipse, Ellipsoid, Cylinder>;

struct ObstacleState {
  Vec3 center = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();  // constant over a run
};

struct Obstacle {
  ObstacleShape shape;
  ObstacleState state;
  std::string id;
};

inline constexpr double kAxisTolerance = 1e-9;
inline constexpr double kDefaultShapeRatio = 3.0;

/// Radius of the conservative circle (sphere, cylinder cross-section) the
/// collision cone is tangent to, inflated by half the vehicle width.
inline double effective_radius(const ObstacleShape& shape, double vehicle_width) {
  const double half_w = 0.5 * vehicle_width;
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlanarEllipse>) {
          return std::max(s.c1, s.c2) + half_w;
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          return std::max({s.c1, s.c2, s.c3}) + half_w;
        } else {
          // the two cross-section radii are the non-height semi-axes, so
          // their max is the second largest of all three
          return std::max(s.radii[0], s.radii[1]) + half_w;
        }
      },
      shape);
}

inline Obstacle advance(Obstacle o, double dt) {
  o.state.center += o.state.velocity * dt;
  return o;
}

/// Position of an obstacle `t` seconds after `o` was captured. Evaluated in
/// closed form so long runs do not accumulate rounding.
inline Obstacle at_time(const Obstacle& o, double t) {
  Obstacle out = o;
  out.state.center = o.state.center + o.state.velocity * t;
  return out;
}

enum class ShapeClass { SphereLike, CylinderLike };

inline ShapeClass classify_shape(double c1, double c2, double c3,
                                 double ratio_threshold = kDefaultShapeRatio) {
  std::array<double, 3> c{c1, c2, c3};
  std::sort(c.begin(), c.end());
  return c[2] / c[1] >= ratio_threshold ? ShapeClass::CylinderLike : ShapeClass::SphereLike;
}

/// Builds a sphere-like ellipsoid or a cylinder along the coordinate axis of
/// the largest semi-axis, following classify_shape.
inline ObstacleShape shape_from_semi_axes(double c1, double c2, double c3,
                                          double ratio_threshold = kDefaultShapeRatio) {
  if (classify_shape(c1, c2, c3, ratio_threshold) == ShapeClass::SphereLike) {
    return Ellipsoid{c1, c2, c3};
  }
  const std::array<double, 3> c{c1, c2, c3};
  const auto big = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
  Cylinder cyl;
  cyl.axis = Vec3::Unit(big);
  cyl.height = c[big];
  cyl.radii = {c[(big + 1) % 3], c[(big + 2) % 3]};
  return cyl;
}

/// Throws DomainError on non-positive semi-axes or a non-unit cylinder axis,
/// AxisVelocityError when a cylinder translates along its axis.
inline void validate_obstacle(const Obstacle& o) {
  if (!o.state.center.allFinite() || !o.state.velocity.allFinite()) {
    throw DomainError("obstacle '" + o.id + "': non-finite center or velocity");
  }
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlanarEllipse>) {
          if (!(s.c1 > 0 && s.c2 > 0)) throw DomainError("obstacle '" + o.id + "': semi-axes must be > 0");
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          if (!(s.c1 > 0 && s.c2 > 0 && s.c3 > 0)) {
            throw DomainError("obstacle '" + o.id + "': semi-axes must be > 0");
          }
        } else {
          if (!(s.height > 0 && s.radii[0] > 0 && s.radii[1] > 0)) {
            throw DomainError("obstacle '" + o.id + "': cylinder dimensions must be > 0");
          }
          if (std::abs(s.axis.norm() - 1.0) > kAxisTolerance) {
            throw DomainError("obstacle '" + o.id + "': cylinder axis must be a unit vector");
          }
          if (std::abs(s.axis.dot(o.state.velocity)) > kAxisTolerance) {
            throw AxisVelocityError("obstacle '" + o.id + "': velocity not perpendicular to axis");
          }
        }
      },
      o.shape);
}

inline bool is_cylinder(const Obstacle& o) { return std::holds_alternative<Cylinder>(o.shape); }

}  // namespace c3bf
