#include "lljump/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace lljump::sim {

using controller::Mode;
using model::Mat3;
using model::Quaternion;
using model::RobotModel;
using model::State;

double GroundModel::height_at(double x, double y) const {
  double h = z_g;
  bool hit = false;
  double best = 0.0;
  for (const auto& p : platforms) {
    if (x >= p.x_min && x <= p.x_max && y >= p.y_min && y <= p.y_max) {
      best = hit ? std::max(best, p.height) : p.height;
      hit = true;
    }
  }
  return hit ? h + best : h;
}

void GroundModel::validate() const {
  if (!(k_n > 0.0) || !(d_n > 0.0)) throw InvalidModel("ground stiffness and damping must be positive");
  if (!(mu >= 0.0)) throw InvalidModel("ground friction must be nonnegative");
  for (const auto& p : platforms) {
    if (!(p.x_min <= p.x_max && p.y_min <= p.y_max)) throw InvalidModel("platform bounds are inverted");
  }
}

void SimConfig::validate() const {
  if (!(control_rate > 0.0)) throw InvalidModel("control rate must be positive");
  if (substeps < 1) throw InvalidModel("need at least one physics substep");
  if (!(noise_sigma >= 0.0)) throw InvalidModel("noise sigma must be nonnegative");
  if (!(duration >= 0.0) || !(settle_time >= 0.0)) throw InvalidModel("durations must be nonnegative");
  if (1.0 / (control_rate * substeps) > 1e-3 + 1e-15) throw InvalidModel("physics substep must not exceed 1 ms");
}

void ControllerConfig::validate() const {
  gains.validate();
  tracking.validate();
  landing.validate();
  if (!(force_phase_duration >= 0.0)) throw InvalidModel("force phase duration must be nonnegative");
  if (!(force_ramp_time >= 0.0)) throw InvalidModel("force ramp time must be nonnegative");
}

std::optional<double> RunLog::first(const std::string& kind) const {
  for (const auto& e : events) {
    if (e.kind == kind) return e.t;
  }
  return std::nullopt;
}

std::size_t RunLog::count(const std::string& kind) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.kind == kind; }));
}

bool RunLog::operator==(const RunLog& o) const {
  std::ostringstream a, b;
  write_runlog_csv(*this, a);
  write_runlog_csv(o, b);
  if (a.str() != b.str() || events.size() != o.events.size()) return false;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].t != o.events[i].t || events[i].kind != o.events[i].kind) return false;
  }
  return true;
}

namespace {

bool finite_state(const State& x) {
  const auto v = x.to_vector();
  return v.allFinite() && x.r.norm() < 1e3 && x.H.norm() < 1e6 && x.L.norm() < 1e6;
}

model::Control control_of(const std::vector<Vec3>& feet, std::vector<Vec3> forces) {
  model::Control u;
  u.feet = feet;
  u.forces = std::move(forces);
  return u;
}

// Forces actually applied during one substep.
std::vector<Vec3> substep_forces(const State& x, const std::vector<Vec3>& feet, const std::vector<bool>& planted,
                                 const std::vector<Vec3>& applied, const GroundModel& ground,
                                 const RobotModel& model) {
  std::vector<Vec3> f = penalty_forces(x, feet, ground, model);
  const std::size_t ppf = model.points_per_foot();
  for (std::size_t i = 0; i < planted.size(); ++i) {
    if (!planted[i]) continue;
    for (std::size_t c = 0; c < ppf; ++c) f[i * ppf + c] = applied[i * ppf + c];
  }
  return f;
}

double max_penetration(const State& x, const std::vector<Vec3>& feet, const GroundModel& ground,
                       const RobotModel& model) {
  double worst = 0.0;
  for (const Vec3& p : model::contact_points(x.q, feet, model)) {
    worst = std::max(worst, ground.height_at(p.x(), p.y()) - p.z());
  }
  return worst;
}

}  // namespace

std::vector<Vec3> penalty_forces(const State& x, const std::vector<Vec3>& feet, const GroundModel& ground,
                                 const RobotModel& model) {
  const std::vector<Vec3> pts = model::contact_points(x.q, feet, model);
  std::vector<Vec3> out(pts.size(), Vec3::Zero());
  const double share = 1.0 / static_cast<double>(pts.size());
  const double k = ground.k_n * share;
  const double d = ground.d_n * share;
  const Vec3 v = x.H / model.total_mass();
  std::optional<Vec3> w;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const Vec3& p = pts[j];
    const double depth = ground.height_at(p.x(), p.y()) - p.z();
    if (depth <= 0.0) continue;
    if (!w) w = model::angular_velocity(x, feet, model);
    const Vec3 pv = v + w->cross(p - x.r);
    const double fn = std::max(0.0, k * depth + d * std::max(0.0, -pv.z()));
    Vec3 ft(-d * pv.x(), -d * pv.y(), 0.0);
    const double cap = ground.mu * fn;
    if (ft.norm() > cap) ft *= cap / ft.norm();
    out[j] = ft + Vec3(0, 0, fn);
  }
  return out;
}

State step_physics(const State& x, const std::vector<Vec3>& feet, const std::vector<bool>& planted,
                   const std::vector<Vec3>& applied, const GroundModel& ground, double dt_sub,
                   const RobotModel& model) {
  if (!(dt_sub > 0.0 && dt_sub <= 1e-3 + 1e-15)) throw InvalidModel("physics substep must lie in (0, 1 ms]");
  if (planted.size() != model.leg_count() || applied.size() != model.force_count()) {
    throw LengthMismatch("planted flags or applied forces have the wrong size");
  }
  const auto f = substep_forces(x, feet, planted, applied, ground, model);
  State next = model::integrate_step(x, control_of(feet, f), dt_sub, model);
  if (!finite_state(next)) throw NumericalBlowup("state left the sanity bounds");
  return next;
}

RunLog run_closed_loop(const Trajectory& plan, const RobotModel& model, const ControllerConfig& ctrl,
                       const detection::DetectorConfig& det, const SimConfig& cfg, const GroundModel& ground) {
  plan.validate();
  model.validate();
  ctrl.validate();
  det.validate();
  cfg.validate();
  ground.validate();
  if (plan.legs != model.leg_count() || plan.points_per_foot != model.points_per_foot()) {
    throw LengthMismatch("plan and model disagree on legs or points per foot");
  }

  const std::size_t legs = model.leg_count();
  const std::size_t ppf = model.points_per_foot();
  const std::size_t P = model.force_count();
  const double m = model.total_mass();
  const double T = 1.0 / cfg.control_rate;
  const double dt_sub = T / cfg.substeps;
  const double plan_T = plan.duration();
  const double total = cfg.duration > 0.0 ? cfg.duration : plan_T + cfg.settle_time;
  const long ticks = std::lround(total * cfg.control_rate);

  const int k_flight = plan.first_knot_of(PhaseKind::Flight);
  const bool has_flight = k_flight >= 0;
  const double t_takeoff = has_flight ? plan.t[k_flight] : plan_T;
  const int k_land = plan.first_knot_of(PhaseKind::PostLanding);
  const double t_land = k_land >= 0 ? plan.t[k_land] : plan_T;
  const std::vector<Vec3> f_land = k_land >= 0 ? plan.controls[k_land].forces : std::vector<Vec3>(P, Vec3::Zero());
  const std::vector<bool> landing_contact = k_land >= 0 ? plan.contact[k_land] : std::vector<bool>(legs, true);

  RunLog log;
  log.legs = legs;
  log.points_per_foot = ppf;
  log.control_rate = cfg.control_rate;
  log.total_mass = m;
  log.config = {{"control_rate", cfg.control_rate}, {"substeps", cfg.substeps}, {"noise_sigma", cfg.noise_sigma},
                {"seed", cfg.seed},                 {"duration", total}};
  log.rows.reserve(static_cast<std::size_t>(ticks));

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  State x = plan.states[0];
  std::vector<Vec3> feet = plan.controls[0].feet;
  std::vector<bool> planted = plan.contact[0];
  std::vector<Vec3> rel(legs, Vec3::Zero());
  bool flying = false;
  bool landed = false;
  bool penetrated = false;
  double t_detect = 0.0;
  Vec3 offset = Vec3::Zero();
  detection::ContactDetector detector(det);
  controller::ControllerMode mode;
  mode.force_phase_duration = ctrl.force_phase_duration;
  std::optional<Eigen::VectorXd> warm;

  GroundModel terrain = ground;
  std::vector<Platform> pending;
  terrain.platforms.clear();
  for (const auto& p : ground.platforms) (p.in_flight ? pending : terrain.platforms).push_back(p);

  for (long k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * T;
    try {
      if (has_flight && !landed && !flying && t >= t_takeoff - 1e-12) {
        flying = true;
        detector.reset(t);
        std::fill(planted.begin(), planted.end(), false);
        log.events.push_back({t, kTakeoff});
      }
      auto plan_time = [&] {
        if (landed) return std::min(t_land + (t - t_detect), plan_T);
        if (flying) return std::min(t, t_land);
        return std::min(t, plan_T);
      };
      double tau = plan_time();
      Trajectory::Sample ref = plan.sample(tau, model);
      if (!flying && !landed) {
        for (std::size_t i = 0; i < legs; ++i) planted[i] = ref.contact[i];
      }

      // Swing legs keep the planned configuration relative to the body.
      const Mat3 R = model::quat_to_rot(x.q);
      const Mat3 R_ref = model::quat_to_rot(ref.x.q);
      for (std::size_t i = 0; i < legs; ++i) {
        if (planted[i]) continue;
        rel[i] = R_ref.transpose() * (ref.u.feet[i] - ref.x.r);
        feet[i] = x.r + R * rel[i];
      }

      if (flying && !pending.empty()) {
        const auto pts = model::contact_points(x.q, feet, model);
        for (auto it = pending.begin(); it != pending.end();) {
          GroundModel only;
          only.z_g = ground.z_g;
          only.platforms = {*it};
          const bool clear = std::all_of(pts.begin(), pts.end(), [&](const Vec3& p) {
            return only.height_at(p.x(), p.y()) <= p.z();
          });
          if (clear) {
            terrain.platforms.push_back(*it);
            it = pending.erase(it);
          } else {
            ++it;
          }
        }
      }

      const detection::SpatialVelocitySample truth =
          detection::average_spatial_velocity(x, control_of(feet, std::vector<Vec3>(P, Vec3::Zero())), model, t);
      Vec3 v_obs = truth.v_com, w_obs = truth.omega;
      if (cfg.noise_sigma > 0.0) {
        for (int i = 0; i < 3; ++i) v_obs[i] += cfg.noise_sigma * noise(rng);
        for (int i = 0; i < 3; ++i) w_obs[i] += cfg.noise_sigma * noise(rng);
      }
      const auto observed = detection::SpatialVelocitySample::make(t, v_obs, w_obs);

      bool event = false;
      if (flying && detector.push(observed)) {
        event = true;
        flying = false;
        landed = true;
        t_detect = t;
        planted = landing_contact;
        Vec3 sum = Vec3::Zero();
        int n = 0;
        for (std::size_t i = 0; i < legs; ++i) {
          if (!planted[i] || k_land < 0) continue;
          sum += feet[i] - plan.controls[k_land].feet[i];
          ++n;
        }
        offset = n > 0 ? Vec3(sum / n) : Vec3::Zero();
        log.events.push_back({t, kContactDetected});
        tau = plan_time();
        ref = plan.sample(tau, model);
      }

      const Mode before = mode.mode;
      mode = controller::update_mode(mode, event, t);
      if (before != mode.mode) {
        log.events.push_back({t, mode.mode == Mode::ForceTracking ? kForceTrackingStart : kForceTrackingEnd});
      }

      // Contact forces for planted legs.
      std::vector<Vec3> applied(P, Vec3::Zero());
      std::string qp_status = "none";
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < legs; ++i) {
        if (!planted[i]) continue;
        for (std::size_t c = 0; c < ppf; ++c) active.push_back(i * ppf + c);
      }
      if (!active.empty()) {
        const auto pts = model::contact_points(x.q, feet, model);
        std::vector<Vec3> points, f_des;
        const bool force_mode = mode.mode == Mode::ForceTracking;
        const double ramp = ctrl.force_ramp_time > 0.0
                                ? std::clamp((t - mode.entered_at) / ctrl.force_ramp_time, 0.0, 1.0)
                                : 1.0;
        for (std::size_t j : active) {
          points.push_back(pts[j]);
          f_des.push_back(force_mode ? Vec3(ramp * f_land[j]) : ref.u.forces[j]);
        }

        // Past the end the final knot's control is meaningless: hold still.
        if (tau >= plan_T - 1e-12) {
          ref.com_vel.setZero();
          ref.com_acc.setZero();
          ref.L_dot.setZero();
        }
        const Vec3 r_des = ref.x.r + (landed ? offset : Vec3::Zero());
        const Vec3 w_des = tau >= plan_T - 1e-12 ? Vec3::Zero() : model::angular_velocity(ref.x, ref.u.feet, model);
        const Mat3 I_W = model::centroidal_inertia(x.q, x.r, feet, model);
        controller::Commands cmd;
        cmd.com_acc = controller::linear_command(r_des, ref.com_vel, ref.com_acc, x.r, v_obs, ctrl.gains);
        cmd.L_dot = ref.L_dot + I_W * controller::angular_command(R_ref, R, w_des, w_obs, Vec3::Zero(), ctrl.gains);

        if (warm && warm->size() != static_cast<Eigen::Index>(3 * active.size())) warm.reset();
        std::vector<Vec3> forces;
        try {
          const auto res = controller::solve_force_qp(x, cmd, points, f_des, force_mode ? ctrl.landing : ctrl.tracking,
                                                      model, warm);
          forces = res.forces;
          warm = res.z;
          qp_status = solver::to_string(res.report.status);
        } catch (const QpInfeasible&) {
          for (const Vec3& f : f_des) forces.push_back(controller::clip_to_pyramid(f, model.mu, model.f_max_z));
          warm.reset();
          qp_status = "fallback";
        }
        for (std::size_t a = 0; a < active.size(); ++a) applied[active[a]] = forces[a];
      } else {
        warm.reset();
      }

      LogRow row;
      row.t = t;
      row.plan_time = tau;
      row.mode = mode.mode;
      row.x = x;
      row.feet = feet;
      row.planted = planted;
      row.v_observed = v_obs;
      row.omega_observed = w_obs;
      row.vg_observed = observed.norm;
      row.vg_true = truth.norm;
      row.penetration = max_penetration(x, feet, terrain, model);
      row.qp_status = qp_status;
      row.forces.assign(P, Vec3::Zero());

      for (int s = 0; s < cfg.substeps; ++s) {
        const Mat3 Rs = model::quat_to_rot(x.q);
        for (std::size_t i = 0; i < legs; ++i) {
          if (!planted[i]) feet[i] = x.r + Rs * rel[i];
        }
        if (flying && !penetrated && max_penetration(x, feet, terrain, model) > 0.0) {
          penetrated = true;
          log.events.push_back({t + s * dt_sub, kFirstPenetration});
        }
        const auto f = substep_forces(x, feet, planted, applied, terrain, model);
        for (std::size_t j = 0; j < P; ++j) row.forces[j] += f[j] / cfg.substeps;
        x = model::integrate_step(x, control_of(feet, f), dt_sub, model);
        if (!finite_state(x)) throw NumericalBlowup("state left the sanity bounds");
      }
      log.rows.push_back(std::move(row));
    } catch (const NumericalBlowup& e) {
      throw NumericalBlowup("tick " + std::to_string(k) + ": " + e.what());
    }
  }
  return log;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double num(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw SchemaError("malformed number '" + s + "'");
  }
  if (used != s.size()) throw SchemaError("malformed number '" + s + "'");
  return v;
}

Mode mode_from_string(const std::string& s) {
  if (s == "trajectory_tracking") return Mode::TrajectoryTracking;
  if (s == "force_tracking") return Mode::ForceTracking;
  throw SchemaError("unknown controller mode '" + s + "'");
}

}  // namespace

void write_runlog_csv(const RunLog& log, std::ostream& os) {
  const std::size_t P = log.legs * log.points_per_foot;
  os << "t,plan_time,mode,r_x,r_y,r_z,q_x,q_y,q_z,q_w,H_x,H_y,H_z,L_x,L_y,L_z,v_obs_x,v_obs_y,v_obs_z,w_obs_x,"
        "w_obs_y,w_obs_z,vg_observed,vg_true,penetration,qp_status";
  for (std::size_t j = 0; j < P; ++j) os << ",f" << j << "_x,f" << j << "_y,f" << j << "_z";
  for (std::size_t i = 0; i < log.legs; ++i) os << ",p" << i << "_x,p" << i << "_y,p" << i << "_z";
  for (std::size_t i = 0; i < log.legs; ++i) os << ",c" << i;
  os << '\n' << std::setprecision(17);
  for (const auto& r : log.rows) {
    os << r.t << ',' << r.plan_time << ',' << controller::to_string(r.mode);
    const auto v = r.x.to_vector();
    for (int i = 0; i < v.size(); ++i) os << ',' << v[i];
    for (int i = 0; i < 3; ++i) os << ',' << r.v_observed[i];
    for (int i = 0; i < 3; ++i) os << ',' << r.omega_observed[i];
    os << ',' << r.vg_observed << ',' << r.vg_true << ',' << r.penetration << ',' << r.qp_status;
    for (const auto& f : r.forces) os << ',' << f.x() << ',' << f.y() << ',' << f.z();
    for (const auto& p : r.feet) os << ',' << p.x() << ',' << p.y() << ',' << p.z();
    for (bool c : r.planted) os << ',' << (c ? 1 : 0);
    os << '\n';
  }
}

RunLog read_runlog_csv(std::istream& is, std::size_t legs, std::size_t points_per_foot) {
  RunLog log;
  log.legs = legs;
  log.points_per_foot = points_per_foot;
  const std::size_t P = legs * points_per_foot;
  const std::size_t cols = 26 + 3 * P + 3 * legs + legs;
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("empty run log");
  if (split(line).size() != cols) throw SchemaError("run log header has the wrong column count");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != cols) throw SchemaError("run log row has the wrong column count");
    LogRow r;
    std::size_t i = 0;
    r.t = num(c[i++]);
    r.plan_time = num(c[i++]);
    r.mode = mode_from_string(c[i++]);
    Eigen::VectorXd v(13);
    for (int j = 0; j < 13; ++j) v[j] = num(c[i++]);
    r.x = State::from_vector(v);
    for (int j = 0; j < 3; ++j) r.v_observed[j] = num(c[i++]);
    for (int j = 0; j < 3; ++j) r.omega_observed[j] = num(c[i++]);
    r.vg_observed = num(c[i++]);
    r.vg_true = num(c[i++]);
    r.penetration = num(c[i++]);
    r.qp_status = c[i++];
    for (std::size_t j = 0; j < P; ++j, i += 3) r.forces.emplace_back(num(c[i]), num(c[i + 1]), num(c[i + 2]));
    for (std::size_t j = 0; j < legs; ++j, i += 3) r.feet.emplace_back(num(c[i]), num(c[i + 1]), num(c[i + 2]));
    for (std::size_t j = 0; j < legs; ++j) r.planted.push_back(c[i++] == "1");
    log.rows.push_back(std::move(r));
  }
  return log;
}

void save_runlog(const RunLog& log, const std::string& base) {
  std::ostringstream csv;
  write_runlog_csv(log, csv);
  nlohmann::json side;
  side["schema_version"] = 1;
  side["kind"] = "runlog";
  side["legs"] = log.legs;
  side["points_per_foot"] = log.points_per_foot;
  side["control_rate"] = log.control_rate;
  side["total_mass"] = log.total_mass;
  side["config"] = log.config;
  side["events"] = nlohmann::json::array();
  for (const auto& e : log.events) side["events"].push_back({{"t", e.t}, {"kind", e.kind}});
  write_file_atomic(base + ".csv", csv.str());
  write_file_atomic(base + ".json", side.dump(2) + "\n");
}

RunLog load_runlog(const std::string& base_in) {
  const std::string base = trajectory_base(base_in);
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file(base + ".json"));
    if (side.value("kind", "") != "runlog") throw SchemaError(base + ".json is not a run log sidecar");
    std::istringstream csv(read_file(base + ".csv"));
    RunLog log = read_runlog_csv(csv, side.at("legs").get<std::size_t>(), side.at("points_per_foot").get<std::size_t>());
    log.control_rate = side.at("control_rate").get<double>();
    log.total_mass = side.at("total_mass").get<double>();
    log.config = side.value("config", nlohmann::json::object());
    for (const auto& e : side.at("events")) log.events.push_back({e.at("t").get<double>(), e.at("kind").get<std::string>()});
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("run log sidecar: ") + e.what());
  }
}

std::optional<double> replay_detection(const RunLog& log, const detection::DetectorConfig& cfg) {
  if (log.rows.empty()) return std::nullopt;
  const double start = log.first(kTakeoff).value_or(log.rows.front().t);
  std::vector<detection::SpatialVelocitySample> stream;
  for (const auto& r : log.rows) {
    if (r.t >= start - 1e-12) stream.push_back(detection::SpatialVelocitySample::make(r.t, r.v_observed, r.omega_observed));
  }
  return detection::detect(stream, cfg);
}

std::optional<double> settle_time(const RunLog& log, double from, double threshold) {
  if (log.rows.empty() || !(log.total_mass > 0.0)) return std::nullopt;
  if (log.rows.back().x.H.norm() / log.total_mass >= threshold) return std::nullopt;
  double since = from;
  for (auto it = log.rows.rbegin(); it != log.rows.rend() && it->t >= from; ++it) {
    if (it->x.H.norm() / log.total_mass >= threshold) break;
    since = it->t;
  }
  return since;
}

double orientation_error_deg(const Quaternion& a, const Quaternion& b) {
  const double c = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return 2.0 * std::acos(c) * 180.0 / M_PI;
}

RolloutError open_loop_error(const Trajectory& plan, const RobotModel& model) {
  plan.validate();
  State x = plan.states.front();
  for (std::size_t k = 0; k + 1 < plan.knot_count(); ++k) x = model::integrate_step(x, plan.controls[k], plan.dt[k], model);
  return {(x.r - plan.states.back().r).norm(), orientation_error_deg(x.q, plan.states.back().q)};
}

}  // namespace lljump::sim
