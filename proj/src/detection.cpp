#include "lljump/detection.hpp"

#include <algorithm>
#include <cmath>

namespace lljump::detection {

SpatialVelocitySample SpatialVelocitySample::make(double t, const Vec3& v_com, const Vec3& omega) {
  return {t, v_com, omega, std::sqrt(v_com.squaredNorm() + omega.squaredNorm())};
}

void DetectorConfig::validate() const {
  if (window < 1) throw InvalidModel("detector window must be at least 1");
  if (!(arm_time >= 0.0)) throw InvalidModel("arming time must be nonnegative");
  if (!std::isfinite(descent_speed)) throw InvalidModel("descent speed must be finite");
  if (!std::isfinite(threshold)) throw InvalidModel("detector threshold must be finite");
}

SpatialVelocitySample average_spatial_velocity(const model::State& x, const model::Control& u,
                                               const model::RobotModel& model, double t) {
  const Vec3 v = x.H / model.total_mass();
  const Vec3 w = model::angular_velocity(x, u.feet, model);
  return SpatialVelocitySample::make(t, v, w);
}

ContactDetector::ContactDetector(DetectorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void ContactDetector::reset(double takeoff_time) {
  takeoff_ = takeoff_time;
  armed_ = false;
  prev_.reset();
  rates_.clear();
  event_.reset();
}

std::optional<double> ContactDetector::push(const SpatialVelocitySample& s) {
  if (event_) return std::nullopt;
  if (!armed_ && s.t - takeoff_ >= cfg_.arm_time - 1e-12 && s.v_com.z() < -cfg_.descent_speed) armed_ = true;
  if (armed_ && prev_ && s.t > prev_->t) {
    rates_.push_back((s.norm - prev_->norm) / (s.t - prev_->t));
    if (static_cast<int>(rates_.size()) > cfg_.window) rates_.pop_front();
  }
  prev_ = s;
  if (static_cast<int>(rates_.size()) == cfg_.window &&
      std::all_of(rates_.begin(), rates_.end(), [&](double r) { return r < cfg_.threshold; })) {
    event_ = s.t;
    return event_;
  }
  return std::nullopt;
}

std::optional<double> detect(const std::vector<SpatialVelocitySample>& stream, const DetectorConfig& cfg) {
  if (stream.empty()) return std::nullopt;
  ContactDetector d(cfg);
  d.reset(stream.front().t);
  for (const auto& s : stream) {
    if (auto e = d.push(s)) return e;
  }
  return std::nullopt;
}

}  // namespace lljump::detection
