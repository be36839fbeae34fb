#pragma once

// Centroidal tracking controller: PD task commands, a weighted force QP over
// the active contact points, and the landing switch to force tracking.

#include <optional>
#include <vector>

#include "lljump/model.hpp"
#include "lljump/solver/qp.hpp"

namespace lljump::controller {

using model::Mat3;
using model::Vec3;

struct TaskGains {
  Mat3 K_P_pos{100.0 * Mat3::Identity()};
  Mat3 K_D_pos{20.0 * Mat3::Identity()};
  Mat3 K_P_ang{100.0 * Mat3::Identity()};
  Mat3 K_D_ang{20.0 * Mat3::Identity()};

  /// Gains must be diagonal with nonnegative entries.
  void validate() const;
};

/// Weights of the force QP, in SI units (residuals in N and N m, forces in N).
struct ControllerWeights {
  Mat3 W_lin{Mat3::Identity()};
  Mat3 W_ang{Mat3::Identity()};
  /// Per-contact force-tracking weight, applied blockwise.
  Mat3 W_2{Mat3::Zero()};
  double w_reg{1e-8};

  void validate() const;

  static ControllerWeights tracking() { return {}; }
  /// Momentum rows off, force tracking on.
  static ControllerWeights landing() { return {Mat3::Zero(), Mat3::Zero(), Mat3::Identity(), 1e-8}; }
};

enum class Mode { TrajectoryTracking, ForceTracking };

const char* to_string(Mode m);

struct ControllerMode {
  Mode mode{Mode::TrajectoryTracking};
  /// Time at which ForceTracking was entered.
  double entered_at{0.0};
  double force_phase_duration{0.2};

  double timer(double now) const { return now - entered_at; }
};

/// Position command: xdd_des + K_P (x_des - x) + K_D (xd_des - xd).
Vec3 linear_command(const Vec3& x_des, const Vec3& xd_des, const Vec3& xdd_des, const Vec3& x, const Vec3& xd,
                    const TaskGains& gains);

/// Orientation command: wd_des + K_P axis*angle(R_des R^T) + K_D (w_des - w), angle in [0, pi].
Vec3 angular_command(const Mat3& R_des, const Mat3& R, const Vec3& w_des, const Vec3& w, const Vec3& wd_des,
                     const TaskGains& gains);

struct Commands {
  Vec3 com_acc{Vec3::Zero()};
  Vec3 L_dot{Vec3::Zero()};
};

struct ForceQpResult {
  std::vector<Vec3> forces;
  solver::SolveReport report;
  /// Stacked solution, reusable as the next warm start.
  Eigen::VectorXd z;
};

/// Distributes contact forces over `points` (world positions of the active
/// contact points). `f_des` may be empty, meaning zero.
///
/// Throws NoActiveContacts for an empty point set and QpInfeasible when the
/// QP does not converge.
ForceQpResult solve_force_qp(const model::State& x, const Commands& cmd, const std::vector<Vec3>& points,
                             const std::vector<Vec3>& f_des, const ControllerWeights& weights,
                             const model::RobotModel& model,
                             const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

/// Nearest-ish force inside 0 <= f_z <= f_max_z and the friction pyramid:
/// f_z is clamped first, then each tangential component.
Vec3 clip_to_pyramid(const Vec3& f, double mu, double f_max_z);

/// Contact events in TrajectoryTracking enter ForceTracking with the timer at
/// `now`; a repeated event does not restart the timer. ForceTracking reverts
/// once force_phase_duration has elapsed.
ControllerMode update_mode(const ControllerMode& m, bool contact_event, double now);

}  // namespace lljump::controller
