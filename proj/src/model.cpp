#include "lljump/model.hpp"

#include <cmath>
#include <sstream>

namespace lljump::model {

namespace {

void require_unit(const Quaternion& q) {
  const double n = q.norm();
  if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
    std::ostringstream os;
    os << "quaternion norm " << n << " deviates from 1 by more than " << kUnitTolerance;
    throw NonUnitQuaternion(os.str());
  }
}

// Rotation matrix from an arbitrary nonzero quaternion; the input is
// normalized first so RK4 stage values off the unit sphere stay usable.
Mat3 rotation_unchecked(const Quaternion& q_raw) {
  const Quaternion q = q_raw.normalized();
  const double xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  Mat3 R;
  R << 1.0 - 2.0 * (yy + zz), 2.0 * xy - 2.0 * wz, 2.0 * wy + 2.0 * xz,
      2.0 * xy + 2.0 * wz, 1.0 - 2.0 * (xx + zz), 2.0 * yz - 2.0 * wx,
      2.0 * xz - 2.0 * wy, 2.0 * wx + 2.0 * yz, 1.0 - 2.0 * (xx + yy);
  return R;
}

Vec4 quat_rate_unchecked(const Quaternion& q, const Vec3& w) {
  Eigen::Matrix4d M;
  M << q.w, -q.z, q.y, q.x,
       q.z, q.w, -q.x, q.y,
      -q.y, q.x, q.w, q.z,
      -q.x, -q.y, -q.z, q.w;
  return 0.5 * M * Vec4(w.x(), w.y(), w.z(), 0.0);
}

void check_feet(const std::vector<Vec3>& feet, const RobotModel& model) {
  if (feet.size() != model.legs.size()) {
    throw LengthMismatch("expected " + std::to_string(model.legs.size()) + " foot positions, got " +
                         std::to_string(feet.size()));
  }
}

double com_denominator(const RobotModel& model) {
  double denom = model.total_mass();
  for (const auto& leg : model.legs) denom -= leg.mass * leg.mass_fraction;
  if (!(denom > 0.0)) throw DegenerateMass("m - sum(m_l * rho) must be positive");
  return denom;
}

Mat3 point_mass_inertia(double m, const Vec3& d) {
  return m * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
}

// Body-frame centroidal inertia without the unit-norm precondition.
Mat3 inertia_body_unchecked(const Mat3& R, const Vec3& com, const std::vector<Vec3>& feet,
                            const RobotModel& model) {
  Mat3 I = model.body_inertia;
  for (std::size_t i = 0; i < model.legs.size(); ++i) {
    const auto& leg = model.legs[i];
    if (leg.mass == 0.0) continue;
    const Vec3 d_world = com - leg_lump_position(feet[i], com, leg);
    I += point_mass_inertia(leg.mass, R.transpose() * d_world);
  }
  return I;
}

struct InertiaSolve {
  Mat3 R;
  Vec3 omega_body;
};

InertiaSolve solve_omega(const Quaternion& q, const Vec3& com, const Vec3& L,
                         const std::vector<Vec3>& feet, const RobotModel& model) {
  InertiaSolve out;
  out.R = rotation_unchecked(q);
  const Mat3 I = inertia_body_unchecked(out.R, com, feet, model);
  Eigen::SelfAdjointEigenSolver<Mat3> eig;
  eig.computeDirect(I, Eigen::EigenvaluesOnly);
  const Vec3 ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() > kMaxInertiaCondition * ev.minCoeff()) {
    throw SingularInertia("centroidal inertia is singular or ill-conditioned");
  }
  out.omega_body = I.ldlt().solve(out.R.transpose() * L);
  return out;
}

using Packed = Eigen::Matrix<double, 13, 1>;

Packed packed_derivative(const Packed& x, const Control& u, const RobotModel& model) {
  const Vec3 r = x.segment<3>(0);
  const Quaternion q{x[3], x[4], x[5], x[6]};
  const Vec3 H = x.segment<3>(7);
  const Vec3 L = x.segment<3>(10);
  const double m = model.total_mass();

  const InertiaSolve s = solve_omega(q, r, L, u.feet, model);

  Vec3 force_sum = Vec3::Zero();
  Vec3 torque_sum = Vec3::Zero();
  const std::size_t per_foot = model.points_per_foot();
  for (std::size_t i = 0; i < model.legs.size(); ++i) {
    for (std::size_t c = 0; c < per_foot; ++c) {
      const Vec3& f = u.forces[i * per_foot + c];
      if (f.isZero(0.0)) continue;
      const Vec3 p = model.foot_type == FootType::Planar ? Vec3(u.feet[i] + s.R * model.corner_offsets[c])
                                                         : u.feet[i];
      force_sum += f;
      torque_sum += (p - r).cross(f);
    }
  }

  Packed d;
  d.segment<3>(0) = H / m;
  d.segment<4>(3) = quat_rate_unchecked(q, s.omega_body);
  d.segment<3>(7) = force_sum + m * model.gravity.g;
  d.segment<3>(10) = torque_sum;
  return d;
}

void check_control(const Control& u, const RobotModel& model) {
  check_feet(u.feet, model);
  if (u.forces.size() != model.force_count()) {
    throw LengthMismatch("expected " + std::to_string(model.force_count()) + " contact forces, got " +
                         std::to_string(u.forces.size()));
  }
}

}  // namespace

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized() * std::sin(0.5 * angle);
  return {a.x(), a.y(), a.z(), std::cos(0.5 * angle)};
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {x / n, y / n, z / n, w / n};
}

Quaternion Quaternion::operator*(const Quaternion& o) const {
  return {w * o.x + x * o.w + y * o.z - z * o.y,
          w * o.y - x * o.z + y * o.w + z * o.x,
          w * o.z + x * o.y - y * o.x + z * o.w,
          w * o.w - x * o.x - y * o.y - z * o.z};
}

Quaternion slerp(const Quaternion& a, const Quaternion& b_in, double s) {
  Quaternion b = b_in;
  double c = a.dot(b);
  if (c < 0.0) {
    b = -b;
    c = -c;
  }
  if (c > 1.0 - 1e-12) {
    return Quaternion::from_coeffs((1.0 - s) * a.coeffs() + s * b.coeffs()).normalized();
  }
  const double theta = std::acos(std::min(1.0, c));
  const double sa = std::sin((1.0 - s) * theta) / std::sin(theta);
  const double sb = std::sin(s * theta) / std::sin(theta);
  return Quaternion::from_coeffs(sa * a.coeffs() + sb * b.coeffs()).normalized();
}

double yaw_of(const Quaternion& q) {
  const Mat3 R = rotation_unchecked(q);
  return std::atan2(R(1, 0), R(0, 0));
}

double RobotModel::total_mass() const { return body_mass + leg_mass(); }

double RobotModel::leg_mass() const {
  double m = 0.0;
  for (const auto& leg : legs) m += leg.mass;
  return m;
}

void RobotModel::validate() const {
  if (!(body_mass > 0.0)) throw InvalidModel("body mass must be positive");
  if (!body_inertia.isApprox(body_inertia.transpose(), 1e-12)) {
    throw InvalidModel("body inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(body_inertia);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw InvalidModel("body inertia must be positive definite");
  if (legs.empty()) throw InvalidModel("at least one leg is required");
  for (const auto& leg : legs) {
    if (!(leg.mass >= 0.0)) throw InvalidModel("leg mass must be nonnegative");
    if (!(leg.mass_fraction >= 0.0 && leg.mass_fraction <= 1.0)) {
      throw InvalidModel("leg mass fraction must lie in [0, 1]");
    }
  }
  if (!(l_min > 0.0 && l_min < l_max)) throw InvalidModel("need 0 < l_min < l_max");
  if (!(mu > 0.0)) throw InvalidModel("friction coefficient must be positive");
  if (!(f_max_z > 0.0)) throw InvalidModel("f_max_z must be positive");
  if (!(total_mass() > 0.0)) throw InvalidModel("total mass must be positive");
}

RobotModel RobotModel::srbm_twin() const {
  RobotModel twin = *this;
  for (auto& leg : twin.legs) leg.mass = 0.0;
  return twin;
}

RobotModel RobotModel::srbm_equivalent(const Vec3& com, const std::vector<Vec3>& feet) const {
  RobotModel twin = *this;
  twin.body_inertia = centroidal_inertia_body(Quaternion::identity(), com, feet, *this);
  twin.body_mass = total_mass();
  for (auto& leg : twin.legs) leg.mass = 0.0;
  return twin;
}

Eigen::Matrix<double, 13, 1> State::to_vector() const {
  Eigen::Matrix<double, 13, 1> v;
  v << r, q.x, q.y, q.z, q.w, H, L;
  return v;
}

State State::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kSize) throw LengthMismatch("state vector must have 13 entries");
  State s;
  s.r = v.segment<3>(0);
  s.q = {v[3], v[4], v[5], v[6]};
  s.H = v.segment<3>(7);
  s.L = v.segment<3>(10);
  return s;
}

Control Control::zero(const RobotModel& model) {
  Control u;
  u.forces.assign(model.force_count(), Vec3::Zero());
  u.feet.assign(model.leg_count(), Vec3::Zero());
  return u;
}

Mat3 quat_to_rot(const Quaternion& q) {
  require_unit(q);
  return rotation_unchecked(q);
}

Vec4 quat_rate(const Quaternion& q, const Vec3& omega) {
  require_unit(q);
  return quat_rate_unchecked(q, omega);
}

Eigen::Matrix<double, 4, 3> quat_rate_matrix(const Quaternion& q) {
  Eigen::Matrix<double, 4, 3> Q;
  Q << q.w, -q.z, q.y,
       q.z, q.w, -q.x,
      -q.y, q.x, q.w,
      -q.x, -q.y, -q.z;
  return 0.5 * Q;
}

Vec3 leg_lump_position(const Vec3& foot, const Vec3& com, const LegLump& leg) {
  return foot + leg.mass_fraction * (com - foot);
}

Vec3 system_com(const Vec3& body_com, const std::vector<Vec3>& feet, const RobotModel& model) {
  check_feet(feet, model);
  const double denom = com_denominator(model);
  Vec3 num = body_com * model.body_mass;
  for (std::size_t i = 0; i < feet.size(); ++i) {
    const auto& leg = model.legs[i];
    num += leg.mass * (1.0 - leg.mass_fraction) * feet[i];
  }
  return num / denom;
}

Vec3 body_position_from_com(const Vec3& com, const std::vector<Vec3>& feet, const RobotModel& model) {
  check_feet(feet, model);
  const double denom = com_denominator(model);
  if (!(model.body_mass > 0.0)) throw DegenerateMass("body mass must be positive");
  Vec3 num = com * denom;
  for (std::size_t i = 0; i < feet.size(); ++i) {
    const auto& leg = model.legs[i];
    num -= leg.mass * (1.0 - leg.mass_fraction) * feet[i];
  }
  return num / model.body_mass;
}

Mat3 centroidal_inertia_body(const Quaternion& q, const Vec3& com, const std::vector<Vec3>& feet,
                             const RobotModel& model) {
  require_unit(q);
  check_feet(feet, model);
  return inertia_body_unchecked(rotation_unchecked(q), com, feet, model);
}

Mat3 centroidal_inertia(const Quaternion& q, const Vec3& com, const std::vector<Vec3>& feet,
                        const RobotModel& model) {
  require_unit(q);
  check_feet(feet, model);
  const Mat3 R = rotation_unchecked(q);
  const Mat3 I = R * inertia_body_unchecked(R, com, feet, model) * R.transpose();
  return 0.5 * (I + I.transpose());
}

Vec3 angular_velocity(const State& x, const std::vector<Vec3>& feet, const RobotModel& model) {
  require_unit(x.q);
  check_feet(feet, model);
  const InertiaSolve s = solve_omega(x.q, x.r, x.L, feet, model);
  return s.R * s.omega_body;
}

std::vector<Vec3> contact_points(const Quaternion& q, const std::vector<Vec3>& feet,
                                 const RobotModel& model) {
  check_feet(feet, model);
  if (model.foot_type == FootType::Point) return feet;
  const Mat3 R = rotation_unchecked(q);
  std::vector<Vec3> pts;
  pts.reserve(feet.size() * 4);
  for (const auto& p : feet) {
    for (const auto& c : model.corner_offsets) pts.push_back(p + R * c);
  }
  return pts;
}

StateDerivative dynamics(const State& x, const Control& u, const RobotModel& model) {
  require_unit(x.q);
  check_control(u, model);
  const Packed d = packed_derivative(x.to_vector(), u, model);
  StateDerivative out;
  out.r_dot = d.segment<3>(0);
  out.q_dot = d.segment<4>(3);
  out.H_dot = d.segment<3>(7);
  out.L_dot = d.segment<3>(10);
  return out;
}

Eigen::Matrix<double, 13, 1> integrate_step_packed(const Eigen::Matrix<double, 13, 1>& x,
                                                   const Control& u, double dt,
                                                   const RobotModel& model) {
  const Packed k1 = packed_derivative(x, u, model);
  const Packed k2 = packed_derivative(x + 0.5 * dt * k1, u, model);
  const Packed k3 = packed_derivative(x + 0.5 * dt * k2, u, model);
  const Packed k4 = packed_derivative(x + dt * k3, u, model);
  Packed next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next.segment<4>(3).normalize();
  return next;
}

State integrate_step(const State& x, const Control& u, double dt, const RobotModel& model) {
  if (!(dt > 0.0)) throw InvalidModel("integration step must be positive");
  require_unit(x.q);
  check_control(u, model);
  const Packed next = integrate_step_packed(x.to_vector(), u, dt, model);
  return State::from_vector(next);
}

}  // namespace lljump::model
