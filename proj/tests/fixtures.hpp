#pragma once

#include <cmath>

#include "lljump/transcription.hpp"

namespace fixtures {

using namespace lljump::model;
using lljump::transcription::JumpTask;

inline RobotModel quadruped() {
  RobotModel m;
  m.body_mass = 25.0;
  m.body_inertia = Vec3(0.4, 1.0, 1.1).asDiagonal();
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0}) m.legs.push_back({2.5, Vec3(0.3 * sx, 0.2 * sy, 0.0), 0.6});
  m.l_min = 0.31;
  m.l_max = 0.6;
  m.mu = 0.7;
  m.f_max_z = 450.0;
  return m;
}

inline RobotModel biped() {
  RobotModel m;
  m.body_mass = 12.0;
  m.body_inertia = Vec3(0.35, 0.3, 0.12).asDiagonal();
  m.legs.push_back({2.0, Vec3(0.0, 0.12, 0.0), 0.5});
  m.legs.push_back({2.0, Vec3(0.0, -0.12, 0.0), 0.5});
  m.foot_type = FootType::Planar;
  m.corner_offsets = {Vec3(0.08, 0.03, 0), Vec3(0.08, -0.03, 0), Vec3(-0.05, 0.03, 0), Vec3(-0.05, -0.03, 0)};
  m.l_min = 0.35;
  m.l_max = 0.75;
  m.mu = 0.8;
  m.f_max_z = 200.0;
  return m;
}

inline std::vector<Vec3> quad_feet(const Vec3& center, double yaw) {
  const Eigen::Matrix3d R = quat_to_rot(Quaternion::from_yaw(yaw));
  std::vector<Vec3> out;
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0}) out.push_back(center + R * Vec3(0.25 * sx, 0.15 * sy, 0.0));
  return out;
}

inline JumpTask quad_twist(double yaw_deg = 90.0, int N = 48) {
  JumpTask t;
  const double yaw = yaw_deg * M_PI / 180.0;
  t.x_ini.r = Vec3(0, 0, 0.4);
  t.x_fin.r = Vec3(0, 0, 0.4);
  t.x_fin.q = Quaternion::from_yaw(yaw);
  t.feet_ini = quad_feet(Vec3::Zero(), 0.0);
  t.feet_fin = quad_feet(Vec3::Zero(), yaw);
  t.t_min = 0.01;
  t.t_max = 0.05;
  t.N = N;
  return t;
}

inline JumpTask quad_forward(double dx = 0.3, int N = 48) {
  JumpTask t;
  t.x_ini.r = Vec3(0, 0, 0.4);
  t.x_fin.r = Vec3(dx, 0, 0.4);
  t.feet_ini = quad_feet(Vec3::Zero(), 0.0);
  t.feet_fin = quad_feet(Vec3(dx, 0, 0), 0.0);
  t.t_min = 0.01;
  t.t_max = 0.05;
  t.N = N;
  return t;
}

}  // namespace fixtures
