#pragma once

// Touchdown detection from the rate of change of the average spatial
// velocity norm.

#include <deque>
#include <optional>
#include <vector>

#include "lljump/model.hpp"

namespace lljump::detection {

using model::Vec3;

struct SpatialVelocitySample {
  double t{0.0};
  Vec3 v_com{Vec3::Zero()};
  Vec3 omega{Vec3::Zero()};
  double norm{0.0};

  static SpatialVelocitySample make(double t, const Vec3& v_com, const Vec3& omega);
};

struct DetectorConfig {
  /// Number of consecutive derivatives that must all lie below the threshold.
  int window{5};
  /// Derivative threshold on the norm, per second.
  double threshold{-2.0};
  /// Time after takeoff before the detector may fire.
  double arm_time{0.05};
  /// The detector also waits until the observed vertical CoM velocity drops
  /// below -descent_speed: while rising the norm shrinks under gravity alone.
  /// A large negative value disables the gate.
  double descent_speed{0.1};

  void validate() const;
};

/// v_com = H / m and omega = I_W^-1 L at the state's configuration.
SpatialVelocitySample average_spatial_velocity(const model::State& x, const model::Control& u,
                                               const model::RobotModel& model, double t = 0.0);

/// Streaming detector; fires at most once per flight.
class ContactDetector {
 public:
  explicit ContactDetector(DetectorConfig cfg = {});

  /// Starts a new flight at `takeoff_time`.
  void reset(double takeoff_time);
  /// Feeds the next sample; returns the contact time when the rule first fires.
  std::optional<double> push(const SpatialVelocitySample& s);

  bool armed() const { return armed_; }
  std::optional<double> event() const { return event_; }
  const DetectorConfig& config() const { return cfg_; }

 private:
  DetectorConfig cfg_;
  double takeoff_{0.0};
  bool armed_{false};
  std::optional<SpatialVelocitySample> prev_;
  std::deque<double> rates_;
  std::optional<double> event_;
};

/// Offline replay over a time-ordered stream whose first sample is takeoff.
std::optional<double> detect(const std::vector<SpatialVelocitySample>& stream, const DetectorConfig& cfg);

}  // namespace lljump::detection
