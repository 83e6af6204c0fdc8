#include <gtest/gtest.h>

#include <random>

#include "c3bf/obstacles.hpp"
#include "c3bf/reference_control.hpp"
#include "c3bf/vehicle_models.hpp"

using namespace c3bf;

namespace {

// Independent construction of the ZYX rotation from Eigen's axis-angle type.
Mat3 rotation_oracle(const EulerAngles& e) {
  return (Eigen::AngleAxisd(e.psi, Vec3::UnitZ()) * Eigen::AngleAxisd(e.theta, Vec3::UnitY()) *
          Eigen::AngleAxisd(e.phi, Vec3::UnitX()))
      .toRotationMatrix();
}

EulerAngles random_attitude(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> pitch(-1.4, 1.4);
  return {ang(rng), pitch(rng), ang(rng)};
}

}  // namespace

TEST(Unicycle, Examples) {
  EXPECT_EQ(unicycle_dynamics({0, 0, 0, 1, 0}, {0, 0}), (Vec<5>() << 1, 0, 0, 0, 0).finished());
  const Vec<5> d = unicycle_dynamics({0, 0, kPi / 2, 2, 0}, {1, 0.5});
  EXPECT_NEAR(d(0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(d(1), 2.0);
  EXPECT_DOUBLE_EQ(d(3), 1.0);
  EXPECT_DOUBLE_EQ(d(4), 0.5);
  EXPECT_EQ(unicycle_dynamics({3, -1, kPi, 0, 1}, {0, 0}), (Vec<5>() << 0, 0, 1, 0, 0).finished());
}

TEST(Bicycle, SlipFromSteering) {
  BicycleParams p;
  EXPECT_EQ(slip_from_steering(0.0, p), 0.0);
  // 30-digit evaluation of atan(0.5 tan 0.2)
  EXPECT_NEAR(slip_from_steering(0.2, p), 0.101010073458161286, 1e-15);
  EXPECT_NEAR(slip_from_steering(1e-6, p) / 1e-6, 0.5, 1e-9);
  EXPECT_THROW(slip_from_steering(kPi / 2, p), DomainError);
  EXPECT_THROW(slip_from_steering(-2.0, p), DomainError);
}

TEST(Bicycle, Examples) {
  BicycleParams p;
  EXPECT_EQ(bicycle_dynamics({0, 0, 0, 1}, {0, 0}, p), Vec4(1, 0, 0, 0));
  const Vec4 d = bicycle_dynamics({0, 0, 0, 2}, {0, 0.1}, p);
  EXPECT_DOUBLE_EQ(d(0), 2.0);
  EXPECT_DOUBLE_EQ(d(1), 0.2);
  EXPECT_NEAR(d(2), 1.3333333333333333, 1e-12);
  EXPECT_EQ(d(3), 0.0);
  EXPECT_EQ(bicycle_dynamics({0, 0, 0, 0}, {1, 0.1}, p), Vec4(0, 0, 0, 1));
  EXPECT_THROW(bicycle_dynamics({0, 0, 0, 1}, {0, 0.6}, p), DomainError);
}

TEST(Quadrotor, RotationExamples) {
  EXPECT_EQ(rotation_matrix({0, 0, 0}), Mat3::Identity());
  const Vec3 y = rotation_matrix({0, 0, kPi / 2}) * Vec3::UnitX();
  EXPECT_LT((y - Vec3::UnitY()).norm(), 1e-15);
}

TEST(Quadrotor, RotationOrthonormalAndMatchesAxisAngle) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto e = random_attitude(rng);
    const Mat3 R = rotation_matrix(e);
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
    EXPECT_LT((R - rotation_oracle(e)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Quadrotor, EulerRateMap) {
  EXPECT_EQ(euler_rate_map({0, 0, 0}).W, Mat3::Identity());
  EXPECT_THROW(euler_rate_map({0, kPi / 2, 0}), GimbalError);
  EXPECT_THROW(euler_rate_map({0, -kPi / 2 + 5e-4, 0}), GimbalError);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> w(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const auto e = random_attitude(rng);
    const auto m = euler_rate_map(e);
    EXPECT_LT((m.W * m.W_inv - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-10);

    // R(e + h rates) - R(e - h rates) over 2h must equal R skew(omega)
    const Vec3 om(w(rng), w(rng), w(rng));
    const Vec3 rates = m.W_inv * om;
    const double h = 1e-6;
    const EulerAngles ep{e.phi + h * rates(0), e.theta + h * rates(1), e.psi + h * rates(2)};
    const EulerAngles em{e.phi - h * rates(0), e.theta - h * rates(1), e.psi - h * rates(2)};
    const Mat3 fd = (rotation_matrix(ep) - rotation_matrix(em)) / (2 * h);
    const Mat3 exact = rotation_matrix(e) * skew(om);
    EXPECT_LT((fd - exact).norm(), 1e-5 * std::max(1.0, exact.norm()));
  }
}

TEST(Quadrotor, HoverAndFreeFall) {
  QuadrotorParams p;
  QuadrotorState s;
  s.vel = Vec3(0.3, -0.2, 0.1);
  const Vec4 f = Vec4::Constant(p.mass * p.g / 4);
  const Vec<12> d = quadrotor_dynamics(s, {f}, p);
  EXPECT_EQ(d.head<3>(), s.vel);
  EXPECT_LT(d.tail<9>().cwiseAbs().maxCoeff(), 1e-15);

  QuadrotorState rest;
  const Vec<12> ff = quadrotor_dynamics(rest, {Vec4::Zero()}, p);
  EXPECT_EQ(ff.segment<3>(3), Vec3(0, 0, -p.g));
}

TEST(Quadrotor, SingleRotorTorque) {
  QuadrotorParams p;
  QuadrotorState s;
  const Vec4 f(3.0, 2.0, 2.0, 2.0);
  const Vec<12> d = quadrotor_dynamics(s, {f}, p);
  EXPECT_DOUBLE_EQ(d(9), p.arm_length * 1.0 / p.inertia_diag(0));
  EXPECT_DOUBLE_EQ(d(10), 0.0);
  EXPECT_NEAR(d(11), p.arm_length * p.c_tau * 1.0 / p.inertia_diag(2), 1e-12);
}

TEST(Quadrotor, GimbalGuard) {
  QuadrotorParams p;
  QuadrotorState s;
  s.euler.theta = kPi / 2 - 1e-4;
  EXPECT_THROW(quadrotor_dynamics(s, {}, p), GimbalError);
}

TEST(PointMass, Examples) {
  EXPECT_EQ(point_mass_dynamics({{0, 0}, {1, 2}}, {0, 0}), Vec4(1, 2, 0, 0));
  EXPECT_EQ(point_mass_dynamics({{5, 5}, {0, 0}}, {1, -1}), Vec4(0, 0, 1, -1));
}

template <class Model>
void check_affine(std::mt19937_64& rng, const typename Model::Params& p) {
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 200; ++i) {
    typename Model::StateVector x;
    for (int k = 0; k < Model::kStateDim; ++k) x(k) = u(rng);
    if constexpr (std::is_same_v<Model, Quadrotor>) x(7) = 0.5 * x(7);
    typename Model::InputVector u1, u2;
    for (int k = 0; k < Model::kInputDim; ++k) {
      u1(k) = u(rng);
      u2(k) = u(rng);
    }
    if constexpr (std::is_same_v<Model, Bicycle>) {
      u1(1) *= 0.1;
      u2(1) *= 0.1;
    }
    const auto s = Model::unpack(x);
    const auto f = [&](const typename Model::InputVector& v) -> typename Model::StateVector {
      return Model::derivative(s, Model::unpack_input(v), p);
    };
    const typename Model::StateVector lhs = f(u1 + u2) - f(u2);
    const typename Model::StateVector rhs = f(u1) - f(Model::InputVector::Zero());
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12) << Model::kName;
  }
}

TEST(Models, AffineInInput) {
  std::mt19937_64 rng(3);
  check_affine<Unicycle>(rng, {});
  check_affine<Bicycle>(rng, {});
  check_affine<Quadrotor>(rng, {});
  check_affine<PointMass>(rng, {});
}

TEST(Models, PackRoundTrip) {
  QuadrotorState s;
  s.pos = Vec3(1, 2, 3);
  s.vel = Vec3(4, 5, 6);
  s.euler = {0.1, 0.2, 0.3};
  s.omega_body = Vec3(7, 8, 9);
  const auto x = Quadrotor::pack(s);
  EXPECT_EQ(Quadrotor::pack(Quadrotor::unpack(x)), x);
  EXPECT_EQ(x(7), 0.2);
}

TEST(Obstacles, EffectiveRadius) {
  EXPECT_DOUBLE_EQ(effective_radius(PlanarEllipse{1.2, 0.55}, 0.4), 1.4);
  EXPECT_DOUBLE_EQ(effective_radius(Ellipsoid{0.5, 0.5, 0.5}, 0.2), 0.6);
  const auto shape = shape_from_semi_axes(0.3, 0.4, 5.0);
  ASSERT_TRUE(std::holds_alternative<Cylinder>(shape));
  EXPECT_DOUBLE_EQ(effective_radius(shape, 0.2), 0.5);
  EXPECT_EQ(std::get<Cylinder>(shape).height, 5.0);
  EXPECT_EQ(std::get<Cylinder>(shape).axis, Vec3::UnitZ());
}

TEST(Obstacles, EffectiveRadiusMonotone) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.1, 3.0);
  for (int i = 0; i < 500; ++i) {
    const Ellipsoid e{d(rng), d(rng), d(rng)};
    const double w = d(rng);
    Ellipsoid bigger = e;
    bigger.c2 += d(rng);
    EXPECT_LE(effective_radius(e, w), effective_radius(bigger, w));
    EXPECT_LE(effective_radius(e, w), effective_radius(e, w + 0.1));
  }
}

TEST(Obstacles, Advance) {
  Obstacle o{PlanarEllipse{1, 1}, {Vec3::Zero(), Vec3(1, 0, 0)}, "o"};
  EXPECT_EQ(advance(o, 0.5).state.center, Vec3(0.5, 0, 0));
  EXPECT_EQ(advance(o, 0.0).state.center, o.state.center);
  o.state.velocity = Vec3(0.25, -0.5, 1.0);
  EXPECT_EQ(advance(advance(o, 0.5), 0.5).state.center, advance(o, 1.0).state.center);
  EXPECT_EQ(at_time(o, 4.0).state.center, Vec3(1.0, -2.0, 4.0));
}

TEST(Obstacles, AdvanceKeepsCylinderVelocityPerpendicular) {
  Cylinder c;
  Obstacle o{c, {Vec3(1, 2, 3), Vec3(0.5, -1, 0)}, "cyl"};
  EXPECT_NO_THROW(validate_obstacle(advance(o, 3.0)));
  o.state.velocity = Vec3(0, 0, 1);
  EXPECT_THROW(validate_obstacle(o), AxisVelocityError);
}

TEST(Obstacles, Classify) {
  EXPECT_EQ(classify_shape(1, 1, 1), ShapeClass::SphereLike);
  EXPECT_EQ(classify_shape(0.3, 0.4, 5), ShapeClass::CylinderLike);
  EXPECT_EQ(classify_shape(1, 1, 2.9), ShapeClass::SphereLike);
  EXPECT_EQ(classify_shape(1, 1, 2.9, 2.5), ShapeClass::CylinderLike);
}

TEST(Obstacles, Validation) {
  EXPECT_THROW(validate_obstacle({PlanarEllipse{0, 1}, {}, "bad"}), DomainError);
  Cylinder c;
  c.axis = Vec3(1, 1, 0);
  EXPECT_THROW(validate_obstacle({c, {}, "axis"}), DomainError);
}

TEST(ReferenceControl, Unicycle) {
  Gains g;
  EXPECT_EQ(pd_unicycle({0, 0, 0.3, 1.0, 0}, ConstantVelocity{1.0, 0.3}, g).a, 0.0);
  EXPECT_EQ(pd_unicycle({0, 0, 0.3, 1.0, 0}, ConstantVelocity{1.0, 0.3}, g).alpha, 0.0);
  EXPECT_GT(pd_unicycle({0, 0, 0, 0.5, 0}, ConstantVelocity{1.0, 0}, g).a, 0.0);
  EXPECT_GT(pd_unicycle({0, 0, 0, 0, 0}, ConstantVelocity{0, kPi / 2}, g).alpha, 0.0);
  // wrap across the seam: from 3.1 to -3.1 is a small positive turn
  EXPECT_GT(pd_unicycle({0, 0, 3.1, 0, 0}, ConstantVelocity{0, -3.1}, g).alpha, 0.0);
  EXPECT_LT(pd_unicycle({0, 0, 3.1, 0, 0}, ConstantVelocity{0, -3.1}, g).alpha, 0.2);
}

TEST(ReferenceControl, Bicycle) {
  Gains g;
  BicycleParams p;
  const auto at = pd_bicycle({0, 0, 0.2, 1.0}, ConstantVelocity{1.0, 0.2}, g, p);
  EXPECT_EQ(at.a, 0.0);
  EXPECT_EQ(at.beta, 0.0);
  EXPECT_EQ(pd_bicycle({0, 0, 0, 1}, ConstantVelocity{1.0, 2.0}, g, p).beta, p.beta_max);
  EXPECT_EQ(pd_bicycle({0, 0, 0, 1}, ConstantVelocity{1.0, -2.0}, g, p).beta, -p.beta_max);
  EXPECT_LT(pd_bicycle({0, 0, 0, 2}, ConstantVelocity{1.0, 0}, g, p).a, 0.0);
}

TEST(ReferenceControl, WaypointSlowsDown) {
  Gains g;
  const auto far = pd_point_mass({{0, 0}, {0, 0}}, Waypoint{Vec3(10, 0, 0), 2.0}, g);
  EXPECT_DOUBLE_EQ(far.x(), 2.0);
  const auto near = pd_point_mass({{0, 0}, {0, 0}}, Waypoint{Vec3(0.5, 0, 0), 2.0}, g);
  EXPECT_DOUBLE_EQ(near.x(), 0.5);
}

TEST(ReferenceControl, QuadrotorHover) {
  Gains g;
  QuadrotorParams p;
  QuadrotorState s;
  s.pos = Vec3(1, 2, 3);
  const auto u = pd_quadrotor(s, Waypoint{s.pos, 1.0}, g, p);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(u.f(i), p.mass * p.g / 4, 1e-12);
}

TEST(ReferenceControl, QuadrotorClimb) {
  Gains g;
  QuadrotorParams p;
  QuadrotorState s;
  const auto u = pd_quadrotor(s, Waypoint{Vec3(0, 0, 5), 1.0}, g, p);
  const Vec4 w = forces_to_wrench(u.f, p);
  EXPECT_GT(w(0), p.mass * p.g);
  EXPECT_LT(w.tail<3>().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReferenceControl, MixerRoundTrip) {
  QuadrotorParams p;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> d(0, 5);
  for (int i = 0; i < 100; ++i) {
    const Vec4 f(d(rng), d(rng), d(rng), d(rng));
    const Vec4 w = forces_to_wrench(f, p);
    const Vec4 back = wrench_to_forces(w(0), w.tail<3>(), p);
    EXPECT_LT((back - f).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ReferenceControl, Memoryless) {
  Gains g;
  QuadrotorParams p;
  QuadrotorState s;
  s.euler = {0.1, -0.2, 0.3};
  s.vel = Vec3(1, 0, 0);
  const Waypoint wp{Vec3(4, -1, 2), 1.5};
  EXPECT_EQ(pd_quadrotor(s, wp, g, p).f, pd_quadrotor(s, wp, g, p).f);
}
