#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace c3bf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using RowVec = Eigen::Matrix<double, 1, N>;
template <int R, int C>
using Mat = Eigen::Matrix<double, R, C>;

inline constexpr double kPi = std::numbers::pi;

// Error hierarchy. Everything thrown by the library derives from c3bf::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Pitch too close to +-pi/2 for the ZYX Euler-rate map to be inverted.
class GimbalError : public Error {
 public:
  using Error::Error;
};

/// The vehicle reference point lies on or inside the conservative circle.
class InsideObstacleError : public Error {
 public:
  using Error::Error;
};

/// A cylinder obstacle translates along its own axis.
class AxisVelocityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedBarrierError : public Error {
 public:
  using Error::Error;
};

class DegenerateConstraintError : public Error {
 public:
  using Error::Error;
};

class IterationLimitError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace c3bf
