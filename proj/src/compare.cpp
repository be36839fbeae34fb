#include <cmath>
#include <iomanip>
#include <sstream>

#include "lljump/sim.hpp"

namespace lljump::sim {

using model::Mat3;
using model::RobotModel;
using model::State;

Trajectory drop_plan(const RobotModel& model, const DropSpec& spec) {
  model.validate();
  if (spec.feet_body.size() != model.leg_count()) throw LengthMismatch("drop plan needs one foot offset per leg");
  if (!(spec.drop_height > 0.0 && spec.stop_time > 0.0 && spec.hold_time >= 0.0 && spec.knot_dt > 0.0)) {
    throw InvalidModel("drop plan times and height must be positive");
  }
  const double m = model.total_mass();
  const double g = -model.gravity.g.z();
  const std::size_t legs = model.leg_count();
  const std::size_t P = model.force_count();

  double stance_z = 0.0;
  for (const Vec3& f : spec.feet_body) stance_z -= f.z() / static_cast<double>(legs);
  const double z0 = stance_z + spec.drop_height;
  const double t_fall = std::sqrt(2.0 * spec.drop_height / g);
  const double v0 = g * t_fall;
  const double decel = v0 / spec.stop_time;

  Trajectory tr;
  tr.legs = legs;
  tr.points_per_foot = model.points_per_foot();
  auto segments = [&](double span) { return std::max(1, static_cast<int>(std::ceil(span / spec.knot_dt - 1e-9))); };
  const int n_fall = segments(t_fall);
  const int n_stop = segments(spec.stop_time);
  const int n_hold = spec.hold_time > 0.0 ? segments(spec.hold_time) : 0;

  std::vector<Vec3> landed_feet;
  for (const Vec3& f : spec.feet_body) landed_feet.push_back(Vec3(0, 0, stance_z) + f);

  auto push = [&](double t, double z, double vz, PhaseKind phase, double fz_each, bool contact) {
    State x;
    x.r = Vec3(0, 0, z);
    x.H = Vec3(0, 0, m * vz);
    model::Control u;
    u.forces.assign(P, Vec3(0, 0, fz_each));
    if (contact) {
      u.feet = landed_feet;
    } else {
      for (const Vec3& f : spec.feet_body) u.feet.push_back(x.r + f);
    }
    tr.t.push_back(t);
    tr.states.push_back(x);
    tr.controls.push_back(u);
    tr.phase.push_back(phase);
    tr.contact.push_back(std::vector<bool>(legs, contact));
  };

  for (int k = 0; k < n_fall; ++k) {
    const double t = t_fall * k / n_fall;
    push(t, z0 - 0.5 * g * t * t, -g * t, PhaseKind::Flight, 0.0, false);
    tr.dt.push_back(t_fall / n_fall);
  }
  const double f_stop = m * (g + decel) / static_cast<double>(P);
  for (int k = 0; k < n_stop; ++k) {
    const double s = spec.stop_time * k / n_stop;
    push(t_fall + s, stance_z - v0 * s + 0.5 * decel * s * s, -v0 + decel * s, PhaseKind::PostLanding, f_stop, true);
    tr.dt.push_back(spec.stop_time / n_stop);
  }
  const double rest_z = stance_z - 0.5 * v0 * spec.stop_time;
  const double f_hold = m * g / static_cast<double>(P);
  for (int k = 0; k <= n_hold; ++k) {
    const double s = n_hold > 0 ? spec.hold_time * k / n_hold : 0.0;
    push(t_fall + spec.stop_time + s, rest_z, 0.0, PhaseKind::PostLanding, f_hold, true);
    if (k < n_hold) tr.dt.push_back(spec.hold_time / n_hold);
  }
  tr.validate();
  return tr;
}

PlanMetrics plan_metrics(const Trajectory& plan, const transcription::JumpTask& task, const RobotModel& model,
                         double tol_deg) {
  plan.validate();
  PlanMetrics pm;
  pm.duration = plan.duration();
  for (std::size_t k = 0; k < plan.knot_count(); ++k) {
    if (orientation_error_deg(plan.states[k].q, task.x_fin.q) <= tol_deg) {
      pm.time_to_target = plan.t[k];
      break;
    }
  }
  pm.final_orientation_error_deg = orientation_error_deg(plan.states.back().q, task.x_fin.q);

  Vec3 travel = task.x_fin.r - task.x_ini.r;
  travel.z() = 0.0;
  const bool has_travel = travel.norm() > 1e-9;
  if (has_travel) travel.normalize();

  double yaw_rate = 0.0, axis = 0.0, ext = 0.0;
  int knots = 0;
  for (std::size_t k = 0; k < plan.knot_count(); ++k) {
    if (plan.phase[k] != PhaseKind::Flight) continue;
    if (k + 1 < plan.knot_count()) pm.flight_duration += plan.dt[k];
    const State& x = plan.states[k];
    const auto& feet = plan.controls[k].feet;
    const Vec3 n = model::quat_to_rot(x.q).col(2);
    double d_axis = 0.0, d_ext = 0.0;
    for (const Vec3& p : feet) {
      const Vec3 d = p - x.r;
      d_axis += (d - d.dot(n) * n).norm();
      if (has_travel) d_ext += std::abs(d.dot(travel));
    }
    d_axis /= static_cast<double>(feet.size());
    d_ext /= static_cast<double>(feet.size());
    pm.flight_t.push_back(plan.t[k]);
    pm.flight_izz.push_back(model::centroidal_inertia(x.q, x.r, feet, model)(2, 2));
    pm.flight_axis_distance.push_back(d_axis);
    yaw_rate += model::angular_velocity(x, feet, model).z();
    axis += d_axis;
    ext += d_ext;
    ++knots;
  }
  if (knots > 0) {
    pm.flight_mean_yaw_rate = yaw_rate / knots;
    pm.flight_mean_axis_distance = axis / knots;
    pm.flight_mean_extension = ext / knots;
  }
  return pm;
}

namespace {

ComparisonSide run_side(const std::string& label, const transcription::JumpTask& task,
                        const transcription::PhaseSchedule& schedule, const transcription::CostWeights& weights,
                        const RobotModel& model, const CompareOptions& opt) {
  ComparisonSide side;
  side.label = label;
  try {
    const auto res = transcription::plan_jump(task, schedule, weights, model, opt.transcription, opt.solver);
    side.report = res.report;
    side.plan = res.trajectory;
    side.solved = res.report.converged();
    if (!side.solved) side.error = "solver ended with status " + solver::to_string(res.report.status);
    side.metrics = plan_metrics(side.plan, task, model);
    if (side.solved && opt.simulate) {
      const RunLog log = run_closed_loop(side.plan, model, opt.controller, opt.detector, opt.sim, opt.ground);
      ClosedLoopSummary s;
      s.planned_landing = side.plan.phase_start(PhaseKind::PostLanding);
      s.detected = log.first(kContactDetected);
      const State& end = log.rows.back().x;
      s.final_com_error = (end.r - side.plan.states.back().r).norm();
      s.final_orientation_error_deg = orientation_error_deg(end.q, side.plan.states.back().q);
      side.closed_loop = s;
    }
  } catch (const Error& e) {
    side.solved = false;
    side.error = e.what();
  }
  return side;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

ComparisonReport compare_models(const transcription::JumpTask& task, const transcription::PhaseSchedule& schedule,
                                const transcription::CostWeights& weights, const RobotModel& model_ll,
                                const RobotModel& model_srb, const CompareOptions& options) {
  ComparisonReport rep;
  rep.ll = run_side("llsrbm", task, schedule, weights, model_ll, options);
  rep.srb = run_side("srbm", task, schedule, weights, model_srb, options);
  return rep;
}

std::string ComparisonReport::to_markdown() const {
  std::ostringstream os;
  const ComparisonSide* sides[] = {&ll, &srb};
  os << "# Planner comparison\n\n## Solve times\n\n";
  os << "| model | status | outer iterations | inner iterations | wall time (s) | objective |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto* s : sides) {
    os << "| " << s->label << " | " << (s->error.empty() ? solver::to_string(s->report.status) : s->error) << " | "
       << s->report.iterations << " | " << s->report.inner_iterations << " | " << fmt(s->report.wall_time_s, 3)
       << " | " << fmt(s->report.objective, 6) << " |\n";
  }
  os << "\n## Plan metrics\n\n";
  os << "| metric | " << ll.label << " | " << srb.label << " | delta |\n|---|---|---|---|\n";
  auto row = [&](const char* name, double a, double b) {
    os << "| " << name << " | " << fmt(a) << " | " << fmt(b) << " | " << fmt(a - b) << " |\n";
  };
  row("duration (s)", ll.metrics.duration, srb.metrics.duration);
  row("flight duration (s)", ll.metrics.flight_duration, srb.metrics.flight_duration);
  row("time to goal orientation (s)", ll.metrics.time_to_target, srb.metrics.time_to_target);
  row("final orientation error (deg)", ll.metrics.final_orientation_error_deg, srb.metrics.final_orientation_error_deg);
  row("flight mean yaw rate (rad/s)", ll.metrics.flight_mean_yaw_rate, srb.metrics.flight_mean_yaw_rate);
  row("flight mean foot-to-axis distance (m)", ll.metrics.flight_mean_axis_distance,
      srb.metrics.flight_mean_axis_distance);
  row("flight mean foot extension along travel (m)", ll.metrics.flight_mean_extension,
      srb.metrics.flight_mean_extension);
  if (ll.closed_loop || srb.closed_loop) {
    os << "\n## Closed loop\n\n| model | planned landing (s) | detected (s) | final CoM error (m) | final orientation "
          "error (deg) |\n|---|---|---|---|---|\n";
    for (const auto* s : sides) {
      if (!s->closed_loop) continue;
      const auto& c = *s->closed_loop;
      os << "| " << s->label << " | " << fmt(c.planned_landing) << " | "
         << (c.detected ? fmt(*c.detected) : std::string("none")) << " | " << fmt(c.final_com_error) << " | "
         << fmt(c.final_orientation_error_deg) << " |\n";
    }
  }
  return os.str();
}

std::string ComparisonReport::profiles_csv() const {
  std::ostringstream os;
  os << "model,t,izz,axis_distance\n" << std::setprecision(17);
  for (const auto* s : {&ll, &srb}) {
    const auto& m = s->metrics;
    for (std::size_t i = 0; i < m.flight_t.size(); ++i) {
      os << s->label << ',' << m.flight_t[i] << ',' << m.flight_izz[i] << ',' << m.flight_axis_distance[i] << '\n';
    }
  }
  return os.str();
}

}  // namespace lljump::sim
