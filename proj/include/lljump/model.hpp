#pragma once

// Lump-leg single rigid body model: a rigid base plus one point mass per leg.
// With every leg mass set to zero the model reduces to the plain single rigid
// body model (SRBM).

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <vector>

#include "lljump/errors.hpp"

namespace lljump::model {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion stored scalar-last: (x, y, z, w).
struct Quaternion {
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double w{1.0};

  static Quaternion identity() { return {}; }
  static Quaternion from_coeffs(const Vec4& c) { return {c[0], c[1], c[2], c[3]}; }
  /// Rotation of `angle` radians about the (normalized) `axis`.
  static Quaternion from_axis_angle(const Vec3& axis, double angle);
  static Quaternion from_yaw(double yaw) { return from_axis_angle(Vec3::UnitZ(), yaw); }

  Vec4 coeffs() const { return {x, y, z, w}; }
  double norm() const { return coeffs().norm(); }
  double dot(const Quaternion& o) const { return x * o.x + y * o.y + z * o.z + w * o.w; }
  Quaternion normalized() const;
  Quaternion operator-() const { return {-x, -y, -z, -w}; }
  /// Hamilton product.
  Quaternion operator*(const Quaternion& o) const;
  Quaternion conjugate() const { return {-x, -y, -z, w}; }

  bool operator==(const Quaternion&) const = default;
};

/// Spherical linear interpolation along the shorter arc.
Quaternion slerp(const Quaternion& a, const Quaternion& b, double s);

/// Yaw angle (rotation about world z) of the body x-axis, in (-pi, pi].
double yaw_of(const Quaternion& q);

struct LegLump {
  double mass{0.0};
  /// Hip position in the body frame.
  Vec3 attach_offset{Vec3::Zero()};
  /// Fraction of the foot-to-CoM vector at which the lump sits (0 = at the foot).
  double mass_fraction{0.0};
};

enum class FootType { Point, Planar };

struct Gravity {
  Vec3 g{0.0, 0.0, -9.81};
};

struct RobotModel {
  double body_mass{1.0};
  Mat3 body_inertia{Mat3::Identity()};
  std::vector<LegLump> legs;
  FootType foot_type{FootType::Point};
  /// Corner offsets of a planar foot relative to its center, body frame.
  std::array<Vec3, 4> corner_offsets{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  double l_min{0.3};
  double l_max{0.6};
  double mu{0.7};
  /// Vertical force limit per contact point.
  double f_max_z{500.0};
  std::optional<Eigen::MatrixXd> default_jacobian;
  std::optional<Eigen::VectorXd> tau_max;
  Gravity gravity{};

  std::size_t leg_count() const { return legs.size(); }
  double total_mass() const;
  double leg_mass() const;
  std::size_t points_per_foot() const { return foot_type == FootType::Planar ? 4 : 1; }
  std::size_t force_count() const { return legs.size() * points_per_foot(); }

  /// Throws InvalidModel when an invariant is broken.
  void validate() const;
  /// Same geometry and limits with every leg mass zeroed.
  RobotModel srbm_twin() const;
  /// Single rigid body carrying the full mass, with the body-frame centroidal
  /// inertia this model has at the given stance (CoM and feet at identity
  /// orientation). Leg masses are zeroed.
  RobotModel srbm_equivalent(const Vec3& com, const std::vector<Vec3>& feet) const;
};

struct State {
  Vec3 r{Vec3::Zero()};
  Quaternion q{};
  Vec3 H{Vec3::Zero()};
  Vec3 L{Vec3::Zero()};

  static constexpr int kSize = 13;
  Eigen::Matrix<double, kSize, 1> to_vector() const;
  static State from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);
};

/// Ground reaction forces (world frame, one per contact point) and foot
/// positions (world frame, foot centers for planar feet).
struct Control {
  std::vector<Vec3> forces;
  std::vector<Vec3> feet;

  static Control zero(const RobotModel& model);
};

struct StateDerivative {
  Vec3 r_dot{Vec3::Zero()};
  Vec4 q_dot{Vec4::Zero()};
  Vec3 H_dot{Vec3::Zero()};
  Vec3 L_dot{Vec3::Zero()};
};

/// Rotation matrix of a unit quaternion (body to world).
Mat3 quat_to_rot(const Quaternion& q);

/// q_dot = 1/2 q o [omega; 0], with omega expressed in the body frame.
Vec4 quat_rate(const Quaternion& q, const Vec3& omega);

/// The 4x3 matrix Q(q) with quat_rate(q, w) == Q(q) * w.
Eigen::Matrix<double, 4, 3> quat_rate_matrix(const Quaternion& q);

Vec3 leg_lump_position(const Vec3& foot, const Vec3& com, const LegLump& leg);

/// Whole-system CoM given the body CoM and the foot positions.
Vec3 system_com(const Vec3& body_com, const std::vector<Vec3>& feet, const RobotModel& model);

/// Inverse of system_com.
Vec3 body_position_from_com(const Vec3& com, const std::vector<Vec3>& feet, const RobotModel& model);

/// Centroidal inertia about the system CoM, body frame (the I_G block).
Mat3 centroidal_inertia_body(const Quaternion& q, const Vec3& com, const std::vector<Vec3>& feet,
                             const RobotModel& model);

/// Centroidal inertia about the system CoM, world frame.
Mat3 centroidal_inertia(const Quaternion& q, const Vec3& com, const std::vector<Vec3>& feet,
                        const RobotModel& model);

/// World-frame angular velocity I_W^-1 L.
Vec3 angular_velocity(const State& x, const std::vector<Vec3>& feet, const RobotModel& model);

/// World positions of every force application point (corners for planar feet).
std::vector<Vec3> contact_points(const Quaternion& q, const std::vector<Vec3>& feet,
                                 const RobotModel& model);

StateDerivative dynamics(const State& x, const Control& u, const RobotModel& model);

/// One classical RK4 step with the control held constant, then quaternion
/// renormalization.
State integrate_step(const State& x, const Control& u, double dt, const RobotModel& model);

/// Packed-vector form of integrate_step used by the transcription; the
/// quaternion part of `x` may be off the unit sphere.
Eigen::Matrix<double, 13, 1> integrate_step_packed(const Eigen::Matrix<double, 13, 1>& x,
                                                   const Control& u, double dt,
                                                   const RobotModel& model);

inline constexpr double kUnitTolerance = 1e-6;
inline constexpr double kMaxInertiaCondition = 1e12;

}  // namespace lljump::model
