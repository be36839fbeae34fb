#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "lljump/controller.hpp"

using namespace lljump;
using namespace lljump::controller;
using lljump::model::Quaternion;

namespace {

model::State standing() {
  model::State x;
  x.r = Vec3(0, 0, 0.4);
  return x;
}

std::vector<Vec3> quad_points() { return fixtures::quad_feet(Vec3::Zero(), 0.0); }

bool in_pyramid(const Vec3& f, double mu, double fmax, double tol) {
  return f.z() >= -tol && f.z() <= fmax + tol && std::abs(f.x()) <= mu * f.z() + tol &&
         std::abs(f.y()) <= mu * f.z() + tol;
}

}  // namespace

TEST_CASE("linear command") {
  TaskGains g;
  const Vec3 xdd(0.1, -0.2, 0.3);
  CHECK(linear_command(Vec3(1, 2, 3), Vec3(4, 5, 6), xdd, Vec3(1, 2, 3), Vec3(4, 5, 6), g) == xdd);

  TaskGains p;
  p.K_D_pos.setZero();
  CHECK(linear_command(Vec3(0.1, 0, 0), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), p)
            .isApprox(Vec3(10, 0, 0)));

  const Vec3 e1(0.3, -0.1, 0.2), e2(-1.0, 0.5, 0.25);
  const Vec3 both = linear_command(e1, e2, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g);
  const Vec3 sum = linear_command(e1, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g) +
                   linear_command(Vec3::Zero(), e2, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g);
  CHECK((both - sum).norm() < 1e-12);
}

TEST_CASE("angular command") {
  TaskGains g;
  g.K_P_ang = 10.0 * Mat3::Identity();
  g.K_D_ang.setZero();
  const Mat3 yaw90 = model::quat_to_rot(Quaternion::from_yaw(std::numbers::pi / 2));
  const Vec3 c = angular_command(yaw90, Mat3::Identity(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g);
  CHECK((c - Vec3(0, 0, 10 * std::numbers::pi / 2)).norm() < 1e-12);

  const Vec3 wd(0.5, 0.1, -0.2);
  CHECK(angular_command(yaw90, yaw90, Vec3(1, 2, 3), Vec3(1, 2, 3), wd, TaskGains{}) == wd);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Mat3 A = model::quat_to_rot(Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized());
    const Mat3 B = model::quat_to_rot(Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized());
    const Vec3 ab = angular_command(A, B, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g);
    const Vec3 ba = angular_command(B, A, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g);
    CHECK((ab + ba).norm() < 1e-9);
  }

  // Continuous through zero angle.
  for (double eps : {1e-3, 1e-6, 1e-9}) {
    const Mat3 R = model::quat_to_rot(Quaternion::from_axis_angle(Vec3(1, 1, 0), eps));
    const Vec3 v = angular_command(R, Mat3::Identity(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g);
    CHECK(v.norm() == doctest::Approx(10 * eps).epsilon(1e-6));
  }
}

TEST_CASE("static stance force distribution") {
  const model::RobotModel m = fixtures::quadruped();
  const ForceQpResult r = solve_force_qp(standing(), {}, quad_points(), {}, ControllerWeights::tracking(), m);
  const double fz = m.total_mass() * 9.81 / 4.0;
  for (const Vec3& f : r.forces) {
    CHECK(std::abs(f.z() - fz) <= 1e-6);
    CHECK(f.head<2>().norm() <= 1e-6);
    CHECK(in_pyramid(f, m.mu, m.f_max_z, 0.0));
  }
  CHECK_THROWS_AS(solve_force_qp(standing(), {}, {}, {}, ControllerWeights::tracking(), m), NoActiveContacts);
}

TEST_CASE("momentum residuals with feasible commands") {
  const model::RobotModel m = fixtures::quadruped();
  model::State x = standing();
  x.r = Vec3(0.02, -0.01, 0.42);
  Commands cmd;
  cmd.com_acc = Vec3(0.5, 0.2, 1.0);
  cmd.L_dot = Vec3(1.0, -2.0, 0.5);
  const ForceQpResult r = solve_force_qp(x, cmd, quad_points(), {}, ControllerWeights::tracking(), m);
  const auto pts = quad_points();
  Vec3 fs = Vec3::Zero(), tau = Vec3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    fs += r.forces[i];
    tau += (pts[i] - x.r).cross(r.forces[i]);
  }
  const Vec3 ma = m.total_mass() * cmd.com_acc;
  CHECK((fs + m.total_mass() * m.gravity.g - ma).norm() <= 1e-6 * (1 + ma.norm()));
  CHECK((tau - cmd.L_dot).norm() <= 1e-6 * (1 + cmd.L_dot.norm()));

  // Warm start from the previous tick returns the same forces.
  const ForceQpResult w = solve_force_qp(x, cmd, quad_points(), {}, ControllerWeights::tracking(), m, r.z);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK((w.forces[i] - r.forces[i]).norm() < 1e-7);
}

TEST_CASE("dominant force tracking projects onto the pyramid") {
  const model::RobotModel m = fixtures::quadruped();
  ControllerWeights w = ControllerWeights::landing();
  w.W_2 = 1e4 * Mat3::Identity();
  const std::vector<Vec3> f_des = {Vec3(10, 5, 80), Vec3(100, 0, 50), Vec3(0, 0, -20), Vec3(0, 0, 600)};
  const ForceQpResult r = solve_force_qp(standing(), {}, quad_points(), f_des, w, m);

  // Euclidean projections: inside stays, one edge face, origin, upper cap.
  const double mu = m.mu;
  const Eigen::Vector2d u = Eigen::Vector2d(mu, 1.0).normalized();
  const Eigen::Vector2d onto = Eigen::Vector2d(100, 50).dot(u) * u;
  const std::vector<Vec3> expect = {f_des[0], Vec3(onto[0], 0, onto[1]), Vec3::Zero(), Vec3(0, 0, m.f_max_z)};
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK((r.forces[i] - expect[i]).norm() < 1e-5);
    CHECK(in_pyramid(r.forces[i], mu, m.f_max_z, 0.0));
  }
}

TEST_CASE("upward command beyond the force limit saturates") {
  const model::RobotModel m = fixtures::quadruped();
  Commands cmd;
  cmd.com_acc = Vec3(0, 0, 4 * m.f_max_z / m.total_mass() + 5.0);
  const ForceQpResult r = solve_force_qp(standing(), cmd, quad_points(), {}, ControllerWeights::tracking(), m);
  for (const Vec3& f : r.forces) CHECK(f.z() == doctest::Approx(m.f_max_z).epsilon(1e-9));
}

TEST_CASE("random commands stay inside the contact constraints") {
  const model::RobotModel m = fixtures::quadruped();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  std::optional<Eigen::VectorXd> warm;
  for (int i = 0; i < 100; ++i) {
    Commands cmd;
    cmd.com_acc = Vec3(u(rng), u(rng), u(rng));
    cmd.L_dot = Vec3(u(rng), u(rng), u(rng));
    const ForceQpResult r = solve_force_qp(standing(), cmd, quad_points(), {}, ControllerWeights::tracking(), m, warm);
    warm = r.z;
    for (const Vec3& f : r.forces) CHECK(in_pyramid(f, m.mu, m.f_max_z, 1e-8));
  }
}

TEST_CASE("clip into the pyramid") {
  CHECK(clip_to_pyramid(Vec3(5, -5, 10), 0.7, 100) == Vec3(5, -5, 10));
  CHECK(clip_to_pyramid(Vec3(50, -50, 10), 0.7, 100).isApprox(Vec3(7, -7, 10)));
  CHECK(clip_to_pyramid(Vec3(1, 1, -3), 0.7, 100) == Vec3(0, 0, 0));
  CHECK(clip_to_pyramid(Vec3(0, 0, 300), 0.7, 100) == Vec3(0, 0, 100));
}

TEST_CASE("mode machine") {
  ControllerMode m;
  m = update_mode(m, false, 0.1);
  CHECK(m.mode == Mode::TrajectoryTracking);
  m = update_mode(m, true, 0.5);
  CHECK(m.mode == Mode::ForceTracking);
  CHECK(m.timer(0.5) == 0.0);
  m = update_mode(m, true, 0.6);
  CHECK(m.entered_at == 0.5);

  // 400 Hz ticks: reverts exactly after 0.2 s.
  ControllerMode t;
  const double T = 1.0 / 400.0;
  int entered = -1, left = -1;
  for (int k = 0; k < 400; ++k) {
    const Mode before = t.mode;
    t = update_mode(t, k == 37, k * T);
    if (before != t.mode && t.mode == Mode::ForceTracking) entered = k;
    if (before != t.mode && t.mode == Mode::TrajectoryTracking) left = k;
  }
  CHECK(entered == 37);
  CHECK((left - entered) * T == doctest::Approx(0.2));
}

TEST_CASE("gain and weight validation") {
  TaskGains g;
  CHECK_NOTHROW(g.validate());
  g.K_P_pos(0, 0) = -1;
  CHECK_THROWS_AS(g.validate(), InvalidModel);
  g = TaskGains{};
  g.K_D_ang(0, 1) = 1;
  CHECK_THROWS_AS(g.validate(), InvalidModel);

  ControllerWeights w;
  CHECK_NOTHROW(w.validate());
  w.w_reg = 0;
  CHECK_THROWS_AS(w.validate(), InvalidModel);
  w = ControllerWeights{};
  w.W_lin = -Mat3::Identity();
  CHECK_THROWS_AS(w.validate(), InvalidModel);
}
