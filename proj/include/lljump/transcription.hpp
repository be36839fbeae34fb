#pragma once

// Multiple-shooting transcription of a jump into a block-structured NLP.
//
// Decision vector, knot by knot (k = 0..N):
//   [ r q H L | stance forces | feet ]  then one dt per phase.
// Forces are present only for knots whose phase has the foot in contact; flight
// forces are eliminated. See docs/layout.md for the exact counts.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lljump/model.hpp"
#include "lljump/solver/nlp.hpp"
#include "lljump/trajectory.hpp"

namespace lljump::transcription {

using model::Control;
using model::Quaternion;
using model::RobotModel;
using model::State;
using model::Vec3;
using model::Vec4;

struct Phase {
  PhaseKind kind{PhaseKind::Takeoff};
  int segments{0};
  std::vector<bool> contact;
  /// Pinned foot position for feet in contact.
  std::vector<std::optional<Vec3>> foot_targets;
};

struct JumpTask {
  State x_ini;
  State x_fin;
  std::vector<Vec3> feet_ini;
  std::vector<Vec3> feet_fin;
  double t_min{0.01};
  double t_max{0.05};
  int N{48};

  void validate(const RobotModel& model) const;
};

struct PhaseSchedule {
  std::vector<Phase> phases;

  int total_segments() const;
  int phase_of_segment(int k) const;
  /// Knot k belongs to the phase of segment min(k, N - 1).
  int phase_of_knot(int k) const;
  void validate(std::size_t leg_count) const;

  /// Takeoff (all feet on feet_ini), flight, post-landing (all feet on
  /// feet_fin). Segment counts default to N/3 each; N must then be divisible
  /// by 3.
  static PhaseSchedule jump(const JumpTask& task, std::optional<std::array<int, 3>> segments = std::nullopt);
};

struct CostWeights {
  double w_smooth_force{1e-4};
  double w_smooth_foot{1e-1};
  double w_H{1e-3};
  double w_L{1e-2};
  double w_time{10.0};
  double w_qfin{1e3};
  double w_qdotfin{10.0};

  void validate() const;
};

struct TranscriptionOptions {
  /// Move the final orientation rows from the hard terminal constraint into
  /// the cost.
  bool orientation_in_cost{true};
  /// Drop flight-phase forces from the decision vector. When false they stay
  /// as variables pinned to zero by equality rows.
  bool eliminate_flight_forces{true};
  /// Minimum height of free feet above the lowest foot target. A few
  /// centimetres keeps swing feet clear of the ground under tracking error.
  double swing_clearance{0.03};
  /// Height the clearance is measured from; defaults to the lowest foot
  /// target. Raise it to the top of a box the robot jumps onto.
  std::optional<double> swing_floor;
};

struct KnotIndex {
  int state{0};
  /// First force variable, or -1 when the knot has no force variables.
  int force{-1};
  int force_count{0};  ///< number of 3-vectors
  /// For every contact point, its slot among the knot's force variables or -1.
  std::vector<int> point_slot;
  int feet{0};

  int force_var(std::size_t point) const {
    return point_slot[point] < 0 ? -1 : force + 3 * point_slot[point];
  }
};

struct Layout {
  int N{0};
  std::size_t legs{0};
  std::size_t points_per_foot{1};
  std::vector<KnotIndex> knots;
  std::vector<int> dt;  ///< one variable per phase
  int n_vars{0};
};

struct TranscribedProblem {
  solver::NlpProblem nlp;
  Layout layout;
  JumpTask task;
  PhaseSchedule schedule;
  RobotModel model;
  CostWeights weights;
  TranscriptionOptions options;
  /// Normalization of the defect rows.
  double momentum_scale{1.0};
  double angular_scale{1.0};
};

/// Throws InconsistentSchedule, InfeasibleBounds, InvalidModel.
TranscribedProblem build_nlp(const JumpTask& task, const PhaseSchedule& schedule, const CostWeights& weights,
                             const RobotModel& model, const TranscriptionOptions& options = {});

/// Closed-form residual and variable counts for a layout.
struct ProblemCounts {
  int n_vars{0};
  int equalities{0};
  int inequalities{0};
};
ProblemCounts expected_counts(const JumpTask& task, const PhaseSchedule& schedule, const RobotModel& model,
                              const TranscriptionOptions& options = {});

solver::Vector initial_guess(const TranscribedProblem& problem);

/// Writes knot data into a decision vector (inverse of extract_trajectory).
solver::Vector pack(const Trajectory& traj, const TranscribedProblem& problem);
Trajectory extract_trajectory(const solver::Vector& z, const TranscribedProblem& problem);

struct PlanResult {
  Trajectory trajectory;
  solver::SolveReport report;
};

/// Transcribes and solves from the default initial guess.
PlanResult plan_jump(const JumpTask& task, const PhaseSchedule& schedule, const CostWeights& weights,
                     const RobotModel& model, const TranscriptionOptions& options = {},
                     const solver::NlpSolverConfig& cfg = {});

// Cost terms evaluated on a trajectory, in the same form the NLP uses.
double cost_smoothness(const Trajectory& traj, const CostWeights& w);
double cost_energy(const Trajectory& traj, const CostWeights& w);
double cost_time(const Trajectory& traj, const CostWeights& w);
double cost_final_orientation(const Trajectory& traj, const JumpTask& task, const CostWeights& w,
                              const RobotModel& model);

/// Rows encode |f_x| <= mu f_z and |f_y| <= mu f_z as P f <= 0.
Eigen::Matrix<double, 4, 3> friction_pyramid_matrix(double mu);

/// J^T tau_max. Throws MissingJacobian when either input is absent.
Eigen::VectorXd grf_limit_from_torques(const std::optional<Eigen::MatrixXd>& jacobian,
                                       const std::optional<Eigen::VectorXd>& tau_max);

/// Vertical force limit for the model: the explicit value when given,
/// otherwise the z-entry of J^T tau_max.
double resolve_f_max_z(const std::optional<double>& explicit_f_max_z, const RobotModel& model);

}  // namespace lljump::transcription
