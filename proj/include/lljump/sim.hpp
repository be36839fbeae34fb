#pragma once

// Closed-loop simulation of the lump-leg model on compliant ground, plus the
// plan comparison used to contrast the lump-leg and single-body planners.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lljump/controller.hpp"
#include "lljump/detection.hpp"
#include "lljump/trajectory.hpp"
#include "lljump/transcription.hpp"

namespace lljump::sim {

using model::Vec3;

/// Axis-aligned rectangle raised (or lowered) relative to the base ground.
struct Platform {
  double x_min{-1e9};
  double x_max{1e9};
  double y_min{-1e9};
  double y_max{1e9};
  double height{0.0};
  /// Slid in during flight: solid only after takeoff, from the first tick at
  /// which no contact point lies inside it.
  bool in_flight{false};
};

/// Penalty ground. k_n and d_n describe the whole robot: each of the model's
/// P contact points gets k_n / P and d_n / P, so a flat landing on every point
/// behaves like a single spring-damper of k_n, d_n.
struct GroundModel {
  double z_g{0.0};
  std::vector<Platform> platforms;
  double k_n{5e4};
  double d_n{2e3};
  double mu{0.8};

  /// Ground height at (x, y); overlapping platforms take the highest.
  double height_at(double x, double y) const;
  void validate() const;
};

struct SimConfig {
  double control_rate{400.0};
  int substeps{5};
  /// Standard deviation of the noise on observed v_com (m/s) and omega (rad/s).
  double noise_sigma{0.0};
  std::uint64_t seed{0};
  /// Total simulated time; 0 means plan duration plus settle_time.
  double duration{0.0};
  double settle_time{1.5};

  void validate() const;
};

struct ControllerConfig {
  controller::TaskGains gains{};
  controller::ControllerWeights tracking{controller::ControllerWeights::tracking()};
  controller::ControllerWeights landing{controller::ControllerWeights::landing()};
  double force_phase_duration{0.2};
  /// f_des rises linearly from zero over this time after touchdown.
  double force_ramp_time{0.05};

  void validate() const;
};

struct LogRow {
  double t{0.0};
  /// Plan time used for the reference.
  double plan_time{0.0};
  controller::Mode mode{controller::Mode::TrajectoryTracking};
  model::State x;
  /// Applied force per contact point, averaged over the physics substeps.
  std::vector<Vec3> forces;
  std::vector<Vec3> feet;
  /// Legs the controller treats as planted.
  std::vector<bool> planted;
  /// Velocities as the controller and detector saw them (noise included).
  Vec3 v_observed{Vec3::Zero()};
  Vec3 omega_observed{Vec3::Zero()};
  double vg_observed{0.0};
  double vg_true{0.0};
  /// Deepest ground penetration over all contact points at tick start.
  double penetration{0.0};
  std::string qp_status;
};

struct Event {
  double t{0.0};
  std::string kind;
};

struct RunLog {
  std::size_t legs{0};
  std::size_t points_per_foot{1};
  double control_rate{0.0};
  double total_mass{0.0};
  std::vector<LogRow> rows;
  std::vector<Event> events;
  nlohmann::json config;

  /// Time of the first event of this kind.
  std::optional<double> first(const std::string& kind) const;
  std::size_t count(const std::string& kind) const;
  bool operator==(const RunLog& o) const;
};

// Event kinds written to RunLog::events.
inline constexpr const char* kTakeoff = "takeoff";
inline constexpr const char* kFirstPenetration = "first_penetration";
inline constexpr const char* kContactDetected = "contact_detected";
inline constexpr const char* kForceTrackingStart = "force_tracking_start";
inline constexpr const char* kForceTrackingEnd = "force_tracking_end";

/// Penalty forces on every contact point for a body whose feet move rigidly
/// with it. Points above ground get zero.
std::vector<Vec3> penalty_forces(const model::State& x, const std::vector<Vec3>& feet, const GroundModel& ground,
                                 const model::RobotModel& model);

/// One physics substep: `applied` forces on planted legs' points, penalty
/// forces on the others, then an RK4 step. Throws NumericalBlowup.
model::State step_physics(const model::State& x, const std::vector<Vec3>& feet, const std::vector<bool>& planted,
                          const std::vector<Vec3>& applied, const GroundModel& ground, double dt_sub,
                          const model::RobotModel& model);

/// Simulates the plan under the tracking controller. Throws NumericalBlowup
/// (with the tick index) when the state diverges.
RunLog run_closed_loop(const Trajectory& plan, const model::RobotModel& model, const ControllerConfig& ctrl,
                       const detection::DetectorConfig& det, const SimConfig& cfg, const GroundModel& ground);

/// CSV columns: t, plan_time, mode, r_xyz, q_xyzw, H_xyz, L_xyz, v_obs_xyz,
/// w_obs_xyz, vg_observed, vg_true, penetration, qp_status, f<j>_xyz per
/// contact point, p<i>_xyz per foot, c<i> (planted) per foot.
void write_runlog_csv(const RunLog& log, std::ostream& os);
RunLog read_runlog_csv(std::istream& is, std::size_t legs, std::size_t points_per_foot);
/// base.csv plus base.json (events, config, sizes).
void save_runlog(const RunLog& log, const std::string& base);
RunLog load_runlog(const std::string& base);

/// Replays the detector over the logged observations, starting at the
/// takeoff event (or the first row when the log has none).
std::optional<double> replay_detection(const RunLog& log, const detection::DetectorConfig& cfg);

/// First tick time at or after `from` from which the true ||v_com|| stays
/// below `threshold` until the end of the log; empty if it never does.
std::optional<double> settle_time(const RunLog& log, double from, double threshold);

/// Rolls the plan's controls forward from its first knot with the planner's
/// integrator and reports the drift at the final knot.
struct RolloutError {
  double com{0.0};
  /// Degrees.
  double orientation{0.0};
};
RolloutError open_loop_error(const Trajectory& plan, const model::RobotModel& model);

/// Geodesic angle between two orientations, degrees.
double orientation_error_deg(const model::Quaternion& a, const model::Quaternion& b);

/// Ballistic drop onto flat ground followed by a constant-deceleration stop
/// and a hold. `feet_body` are foot offsets from the CoM at identity
/// orientation; feet touch z = 0 at the end of the flight.
struct DropSpec {
  std::vector<Vec3> feet_body;
  double drop_height{0.3};
  double stop_time{0.18};
  double hold_time{0.5};
  double knot_dt{0.01};
};
Trajectory drop_plan(const model::RobotModel& model, const DropSpec& spec);

struct PlanMetrics {
  double duration{0.0};
  double flight_duration{0.0};
  /// First knot time within `tol_deg` of the goal orientation; negative if never.
  double time_to_target{-1.0};
  double final_orientation_error_deg{0.0};
  double flight_mean_yaw_rate{0.0};
  /// Mean over flight knots and feet of the foot distance to the body z-axis through the CoM.
  double flight_mean_axis_distance{0.0};
  /// Mean over flight knots and feet of |(p - r) . travel direction|; zero without horizontal travel.
  double flight_mean_extension{0.0};
  std::vector<double> flight_t;
  std::vector<double> flight_izz;
  std::vector<double> flight_axis_distance;
};

PlanMetrics plan_metrics(const Trajectory& plan, const transcription::JumpTask& task, const model::RobotModel& model,
                         double tol_deg = 2.0);

struct ClosedLoopSummary {
  double planned_landing{0.0};
  std::optional<double> detected;
  double final_com_error{0.0};
  double final_orientation_error_deg{0.0};
};

struct ComparisonSide {
  std::string label;
  bool solved{false};
  std::string error;
  solver::SolveReport report;
  Trajectory plan;
  PlanMetrics metrics;
  std::optional<ClosedLoopSummary> closed_loop;
};

struct ComparisonReport {
  ComparisonSide ll;
  ComparisonSide srb;

  bool both_solved() const { return ll.solved && srb.solved; }
  std::string to_markdown() const;
  /// Tidy per-knot flight profiles: model,t,izz,axis_distance.
  std::string profiles_csv() const;
};

struct CompareOptions {
  transcription::TranscriptionOptions transcription{};
  solver::NlpSolverConfig solver{};
  bool simulate{false};
  SimConfig sim{};
  ControllerConfig controller{};
  detection::DetectorConfig detector{};
  GroundModel ground{};
};

/// Plans (and optionally simulates) the same task with both models. Solver
/// failures are recorded per side rather than thrown.
ComparisonReport compare_models(const transcription::JumpTask& task, const transcription::PhaseSchedule& schedule,
                                const transcription::CostWeights& weights, const model::RobotModel& model_ll,
                                const model::RobotModel& model_srb, const CompareOptions& options = {});

}  // namespace lljump::sim
