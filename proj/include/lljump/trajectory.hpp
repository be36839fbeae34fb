#pragma once

// Planned knot trajectory, reference sampling, and its CSV + JSON sidecar form.

#include <json.hpp>

#include <string>
#include <vector>

#include "lljump/model.hpp"

namespace lljump {

enum class PhaseKind { Takeoff, Flight, PostLanding };

std::string to_string(PhaseKind k);
PhaseKind phase_kind_from_string(const std::string& s);

struct Trajectory {
  std::size_t legs{0};
  std::size_t points_per_foot{1};
  std::vector<double> t;  ///< knot times, t[0] = 0
  std::vector<model::State> states;
  /// Per knot; flight knots carry zero forces.
  std::vector<model::Control> controls;
  std::vector<PhaseKind> phase;
  std::vector<std::vector<bool>> contact;  ///< per knot, per leg
  std::vector<double> dt;                  ///< per segment

  std::size_t knot_count() const { return states.size(); }
  double duration() const { return t.empty() ? 0.0 : t.back(); }
  void validate() const;

  /// First knot of the first phase of kind `k`, or -1.
  int first_knot_of(PhaseKind k) const;
  double phase_start(PhaseKind k) const;

  struct Sample {
    model::State x;
    model::Control u;
    PhaseKind phase{PhaseKind::Takeoff};
    std::vector<bool> contact;
    model::Vec3 com_vel{model::Vec3::Zero()};
    model::Vec3 com_acc{model::Vec3::Zero()};
    model::Vec3 L_dot{model::Vec3::Zero()};
  };

  /// States (and feet) interpolate linearly between knots, the quaternion by
  /// slerp; forces are held from the left knot. Times outside the plan clamp.
  Sample sample(double time, const model::RobotModel& model) const;

  bool operator==(const Trajectory&) const;
};

/// CSV columns: knot, t, dt, phase, r_xyz, q_xyzw, H_xyz, L_xyz,
/// f<j>_xyz for every contact point, p<i>_xyz per foot, c<i> per foot.
/// `dt` on the last knot is 0.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);
Trajectory read_trajectory_csv(std::istream& is, std::size_t legs, std::size_t points_per_foot);

/// Writes `<base>.csv` and `<base>.json`; the sidecar gets `meta` merged in.
/// Both files are written to temporaries and renamed into place.
void save_trajectory(const Trajectory& traj, const std::string& base, const nlohmann::json& meta);
Trajectory load_trajectory(const std::string& base, nlohmann::json* meta = nullptr);

/// Strips a trailing .csv or .json so either file names the pair.
std::string trajectory_base(const std::string& path);

/// Write `content` to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace lljump
