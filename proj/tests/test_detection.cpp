#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "lljump/detection.hpp"

using namespace lljump;
using namespace lljump::detection;
using lljump::model::Vec3;

namespace {

constexpr double kRate = 400.0;

// Norm samples falling straight down: v_com = (0, 0, -norm).
std::vector<SpatialVelocitySample> vertical(const std::vector<double>& norms, double t0 = 0.0) {
  std::vector<SpatialVelocitySample> out;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    out.push_back(SpatialVelocitySample::make(t0 + k / kRate, Vec3(0, 0, -norms[k]), Vec3::Zero()));
  }
  return out;
}

// Free fall for `rise` samples after the arming delay, then `drop` samples
// decreasing at 50/s, then free fall again.
std::vector<double> rise_then_drop(int drop) {
  std::vector<double> n;
  double v = 0.0;
  for (int k = 0; k < 60; ++k) n.push_back(v += 9.81 / kRate);
  for (int k = 0; k < drop; ++k) n.push_back(v -= 50.0 / kRate);
  for (int k = 0; k < 20; ++k) n.push_back(v += 9.81 / kRate);
  return n;
}

}  // namespace

TEST_CASE("average spatial velocity") {
  const model::RobotModel m = fixtures::quadruped();
  model::State x;
  x.r = Vec3(0, 0, 0.4);
  model::Control u = model::Control::zero(m);
  u.feet = fixtures::quad_feet(Vec3::Zero(), 0.0);
  CHECK(average_spatial_velocity(x, u, m).norm == 0.0);

  x.H = Vec3(0, 0, -85.05);
  const SpatialVelocitySample s = average_spatial_velocity(x, u, m);
  CHECK(m.total_mass() == 35.0);
  CHECK((s.v_com - Vec3(0, 0, -2.43)).norm() < 1e-12);

  x.L = Vec3(0.3, -1.0, 2.0);
  const SpatialVelocitySample a = average_spatial_velocity(x, u, m);
  CHECK(a.norm == doctest::Approx(std::sqrt(a.v_com.squaredNorm() + a.omega.squaredNorm())).epsilon(1e-15));
  x.H *= 3.0;
  x.L *= 3.0;
  CHECK(average_spatial_velocity(x, u, m).norm == doctest::Approx(3.0 * a.norm).epsilon(1e-12));
}

TEST_CASE("free fall never fires") {
  std::vector<double> n;
  for (int k = 0; k < 400; ++k) n.push_back(0.5 + 9.81 * k / kRate);
  CHECK_FALSE(detect(vertical(n), {}).has_value());
}

TEST_CASE("windowed rule traced by hand") {
  CHECK_FALSE(detect(vertical(rise_then_drop(3)), {}).has_value());
  const auto e = detect(vertical(rise_then_drop(5)), {});
  REQUIRE(e.has_value());
  // Samples 60..64 carry the drop; the fifth dropped sample is index 64.
  CHECK(*e == doctest::Approx(64 / kRate));

  // A single-sample window reacts to the first decreasing sample.
  DetectorConfig one;
  one.window = 1;
  const auto e1 = detect(vertical(rise_then_drop(5)), one);
  REQUIRE(e1.has_value());
  CHECK(*e1 == doctest::Approx(60 / kRate));
}

TEST_CASE("uniform time shift does not change the decision") {
  const auto base = detect(vertical(rise_then_drop(6)), {});
  const auto shifted = detect(vertical(rise_then_drop(6), 12.345), {});
  REQUIRE(base.has_value());
  REQUIRE(shifted.has_value());
  CHECK(*shifted - 12.345 == doctest::Approx(*base).epsilon(1e-9));
}

TEST_CASE("rising half of a jump does not arm the detector") {
  // Takeoff at 2 m/s: the norm shrinks at 9.81/s until the apex.
  std::vector<SpatialVelocitySample> s;
  for (int k = 0; k < 200; ++k) {
    const double t = k / kRate;
    s.push_back(SpatialVelocitySample::make(t, Vec3(0.3, 0, 2.0 - 9.81 * t), Vec3::Zero()));
  }
  CHECK_FALSE(detect(s, {}).has_value());
  DetectorConfig naive;
  naive.descent_speed = -1e9;
  CHECK(detect(s, naive).has_value());
}

TEST_CASE("ballistic flight of the model never fires") {
  const model::RobotModel m = fixtures::quadruped();
  model::State x;
  x.r = Vec3(0, 0, 0.4);
  x.H = m.total_mass() * Vec3(0.4, 0.0, 1.8);
  x.L = Vec3(0, 0, 3.0);
  model::Control u = model::Control::zero(m);
  ContactDetector d;
  d.reset(0.0);
  const double dt = 1.0 / kRate;
  for (int k = 0; k < 160; ++k) {
    u.feet.clear();
    const model::Mat3 R = model::quat_to_rot(x.q);
    for (const Vec3& p : fixtures::quad_feet(Vec3::Zero(), 0.0)) u.feet.push_back(x.r + R * (p - Vec3(0, 0, 0.4)));
    CHECK_FALSE(d.push(average_spatial_velocity(x, u, m, k * dt)).has_value());
    x = model::integrate_step(x, u, dt, m);
  }
  CHECK(d.armed());
}

TEST_CASE("impact latency is bounded by the window") {
  std::vector<double> n;
  double v = 1.0;
  for (int k = 0; k < 40; ++k) n.push_back(v += 9.81 / kRate);
  const int first_decel = static_cast<int>(n.size());
  for (int k = 0; k < 30; ++k) n.push_back(v *= 0.8);
  const auto e = detect(vertical(n), {});
  REQUIRE(e.has_value());
  CHECK(*e - first_decel / kRate <= 5 / kRate + 1e-12);
  CHECK(*e >= first_decel / kRate);
}

TEST_CASE("noisy flight false-positive rate") {
  // One second of flight after a 2 m/s takeoff, velocity noise 0.05 m/s.
  int fired = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    ContactDetector d;
    d.reset(0.0);
    bool hit = false;
    for (int k = 0; k < 400 && !hit; ++k) {
      const double t = k / kRate;
      const Vec3 v(0.3 + noise(rng), noise(rng), 2.0 - 9.81 * t + noise(rng));
      const Vec3 w(noise(rng), noise(rng), 1.0 + noise(rng));
      hit = d.push(SpatialVelocitySample::make(t, v, w)).has_value();
    }
    fired += hit;
  }
  CHECK(fired <= 5);
}

TEST_CASE("at most one event per flight") {
  ContactDetector d;
  d.reset(0.0);
  int events = 0;
  for (const auto& s : vertical(rise_then_drop(12))) events += d.push(s).has_value();
  CHECK(events == 1);
  d.reset(1.0);
  CHECK_FALSE(d.event().has_value());
}

TEST_CASE("detector config validation") {
  DetectorConfig c;
  c.window = 0;
  CHECK_THROWS_AS(c.validate(), InvalidModel);
  c = {};
  c.arm_time = -1;
  CHECK_THROWS_AS(c.validate(), InvalidModel);
}
