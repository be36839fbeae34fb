#include "lljump/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace lljump::scenario {

using nlohmann::json;
using model::Mat3;
using model::Quaternion;
using model::State;
using model::Vec3;

std::string to_string(Variant v) { return v == Variant::Srbm ? "srbm" : "llsrbm"; }

Variant variant_from_string(const std::string& s) {
  if (s == "llsrbm") return Variant::LlSrbm;
  if (s == "srbm") return Variant::Srbm;
  throw SchemaError("unknown model variant '" + s + "' (expected llsrbm or srbm)");
}

namespace {

// Object view that remembers which keys were read so leftovers can be
// reported as unknown.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw SchemaError("missing required key " + where(key));
    return j_.at(key);
  }

  std::optional<std::reference_wrapper<const json>> opt(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return std::cref(j_.at(key));
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw SchemaError("unknown key " + where(key));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path + " must be finite");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path + " must be an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path + " must be true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path + " must be a string");
  return j.get<std::string>();
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(path + " must be an array of 3 numbers");
  return Vec3(number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]"));
}

std::vector<Vec3> vec3_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path + " must be an array");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(vec3(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// A scalar s (s I), a 3-vector (diagonal) or a 3x3 row-major array.
Mat3 mat3(const json& j, const std::string& path) {
  if (j.is_number()) return number(j, path) * Mat3::Identity();
  if (j.is_array() && j.size() == 3 && j[0].is_number()) return vec3(j, path).asDiagonal();
  if (j.is_array() && j.size() == 3) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[r], path + "[" + std::to_string(r) + "]").transpose();
    return m;
  }
  throw SchemaError(path + " must be a number, a 3-vector or a 3x3 array");
}

template <typename T, typename F>
void read(Obj& o, const std::string& key, T& out, F conv) {
  if (auto v = o.opt(key)) out = conv(v->get(), o.where(key));
}

void read_number(Obj& o, const std::string& key, double& out) { read(o, key, out, number); }
void read_int(Obj& o, const std::string& key, int& out) { read(o, key, out, integer); }

State parse_state(const json& j, const std::string& path) {
  Obj o(j, path);
  State x;
  x.r = vec3(o.at("r"), o.where("r"));
  const bool has_q = o.has("q");
  const bool has_yaw = o.has("yaw_deg");
  if (has_q && has_yaw) throw SchemaError(path + " gives both q and yaw_deg");
  if (auto q = o.opt("q")) {
    const json& a = q->get();
    if (!a.is_array() || a.size() != 4) throw SchemaError(o.where("q") + " must be [x, y, z, w]");
    model::Vec4 c;
    for (int i = 0; i < 4; ++i) c[i] = number(a[i], o.where("q"));
    x.q = Quaternion::from_coeffs(c);
  }
  if (auto y = o.opt("yaw_deg")) x.q = Quaternion::from_yaw(number(y->get(), o.where("yaw_deg")) * M_PI / 180.0);
  if (auto h = o.opt("H")) x.H = vec3(h->get(), o.where("H"));
  if (auto l = o.opt("L")) x.L = vec3(l->get(), o.where("L"));
  o.finish();
  return x;
}

model::RobotModel parse_robot(const json& j, Variant& variant) {
  Obj o(j, "robot");
  model::RobotModel m;
  m.body_mass = number(o.at("body_mass"), "robot.body_mass");
  m.body_inertia = mat3(o.at("body_inertia"), "robot.body_inertia");
  const json& legs = o.at("legs");
  if (!legs.is_array() || legs.empty()) throw SchemaError("robot.legs must be a non-empty array");
  for (std::size_t i = 0; i < legs.size(); ++i) {
    Obj l(legs[i], "robot.legs[" + std::to_string(i) + "]");
    model::LegLump leg;
    leg.mass = number(l.at("mass"), l.where("mass"));
    leg.attach_offset = vec3(l.at("hip"), l.where("hip"));
    read_number(l, "mass_fraction", leg.mass_fraction);
    l.finish();
    m.legs.push_back(leg);
  }
  if (auto f = o.opt("foot_type")) {
    const std::string s = text(f->get(), "robot.foot_type");
    if (s == "point") {
      m.foot_type = model::FootType::Point;
    } else if (s == "planar") {
      m.foot_type = model::FootType::Planar;
    } else {
      throw SchemaError("robot.foot_type must be point or planar");
    }
  }
  if (auto c = o.opt("corner_offsets")) {
    const auto corners = vec3_list(c->get(), "robot.corner_offsets");
    if (corners.size() != 4) throw SchemaError("robot.corner_offsets needs 4 entries");
    for (int i = 0; i < 4; ++i) m.corner_offsets[i] = corners[i];
  }
  read_number(o, "l_min", m.l_min);
  read_number(o, "l_max", m.l_max);
  read_number(o, "mu", m.mu);
  read_number(o, "f_max_z", m.f_max_z);
  if (auto g = o.opt("gravity")) m.gravity.g = vec3(g->get(), "robot.gravity");
  if (auto t = o.opt("tau_max")) {
    const json& a = t->get();
    if (!a.is_array()) throw SchemaError("robot.tau_max must be an array");
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = number(a[i], "robot.tau_max");
    m.tau_max = v;
  }
  if (auto jac = o.opt("jacobian")) {
    const json& a = jac->get();
    if (!a.is_array() || a.empty() || !a[0].is_array()) throw SchemaError("robot.jacobian must be an array of rows");
    Eigen::MatrixXd J(a.size(), a[0].size());
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (!a[r].is_array() || a[r].size() != a[0].size()) throw SchemaError("robot.jacobian rows differ in length");
      for (std::size_t c = 0; c < a[r].size(); ++c) J(r, c) = number(a[r][c], "robot.jacobian");
    }
    m.default_jacobian = J;
  }
  if (auto v = o.opt("model")) variant = variant_from_string(text(v->get(), "robot.model"));
  o.finish();
  try {
    m.validate();
  } catch (const InvalidModel& e) {
    throw SchemaError(std::string("robot: ") + e.what());
  }
  return m;
}

transcription::JumpTask parse_task(const json& j) {
  Obj o(j, "task");
  transcription::JumpTask t;
  t.x_ini = parse_state(o.at("x_ini"), "task.x_ini");
  t.x_fin = parse_state(o.at("x_fin"), "task.x_fin");
  t.feet_ini = vec3_list(o.at("feet_ini"), "task.feet_ini");
  t.feet_fin = vec3_list(o.at("feet_fin"), "task.feet_fin");
  read_number(o, "t_min", t.t_min);
  read_number(o, "t_max", t.t_max);
  read_int(o, "N", t.N);
  o.finish();
  return t;
}

sim::DropSpec parse_drop(const json& j) {
  Obj o(j, "drop");
  sim::DropSpec d;
  d.feet_body = vec3_list(o.at("feet_body"), "drop.feet_body");
  read_number(o, "drop_height", d.drop_height);
  read_number(o, "stop_time", d.stop_time);
  read_number(o, "hold_time", d.hold_time);
  read_number(o, "knot_dt", d.knot_dt);
  o.finish();
  return d;
}

std::optional<std::array<int, 3>> parse_schedule(const json& j) {
  Obj o(j, "schedule");
  std::optional<std::array<int, 3>> out;
  if (auto s = o.opt("segments")) {
    const json& a = s->get();
    if (!a.is_array() || a.size() != 3) throw SchemaError("schedule.segments must list takeoff, flight, landing");
    out = std::array<int, 3>{integer(a[0], "schedule.segments"), integer(a[1], "schedule.segments"),
                             integer(a[2], "schedule.segments")};
  }
  o.finish();
  return out;
}

transcription::CostWeights parse_weights(const json& j) {
  Obj o(j, "weights");
  transcription::CostWeights w;
  read_number(o, "w_smooth_force", w.w_smooth_force);
  read_number(o, "w_smooth_foot", w.w_smooth_foot);
  read_number(o, "w_H", w.w_H);
  read_number(o, "w_L", w.w_L);
  read_number(o, "w_time", w.w_time);
  read_number(o, "w_qfin", w.w_qfin);
  read_number(o, "w_qdotfin", w.w_qdotfin);
  o.finish();
  return w;
}

transcription::TranscriptionOptions parse_transcription(const json& j) {
  Obj o(j, "transcription");
  transcription::TranscriptionOptions t;
  read(o, "orientation_in_cost", t.orientation_in_cost, boolean);
  read(o, "eliminate_flight_forces", t.eliminate_flight_forces, boolean);
  read_number(o, "swing_clearance", t.swing_clearance);
  if (auto f = o.opt("swing_floor")) t.swing_floor = number(f->get(), o.where("swing_floor"));
  o.finish();
  return t;
}

solver::NlpSolverConfig parse_solver(const json& j) {
  Obj o(j, "solver");
  solver::NlpSolverConfig c;
  read_int(o, "max_outer_iters", c.max_outer_iters);
  read_int(o, "max_inner_iters", c.max_inner_iters);
  read_number(o, "kkt_tol", c.kkt_tol);
  read_number(o, "constraint_tol", c.constraint_tol);
  read_number(o, "initial_penalty", c.initial_penalty);
  read_number(o, "penalty_growth", c.penalty_growth);
  read_number(o, "max_penalty", c.max_penalty);
  if (auto m = o.opt("inner_method")) {
    const std::string s = text(m->get(), "solver.inner_method");
    if (s == "auto") {
      c.inner_method = solver::InnerMethod::Auto;
    } else if (s == "lbfgs") {
      c.inner_method = solver::InnerMethod::Lbfgs;
    } else if (s == "gauss_newton") {
      c.inner_method = solver::InnerMethod::GaussNewton;
    } else {
      throw SchemaError("solver.inner_method must be auto, lbfgs or gauss_newton");
    }
  }
  o.finish();
  return c;
}

controller::ControllerWeights parse_qp_weights(const json& j, const std::string& path,
                                               controller::ControllerWeights w) {
  Obj o(j, path);
  if (auto v = o.opt("W_lin")) w.W_lin = mat3(v->get(), o.where("W_lin"));
  if (auto v = o.opt("W_ang")) w.W_ang = mat3(v->get(), o.where("W_ang"));
  if (auto v = o.opt("W_2")) w.W_2 = mat3(v->get(), o.where("W_2"));
  read_number(o, "w_reg", w.w_reg);
  o.finish();
  return w;
}

sim::ControllerConfig parse_controller(const json& j) {
  Obj o(j, "controller");
  sim::ControllerConfig c;
  if (auto g = o.opt("gains")) {
    Obj go(g->get(), "controller.gains");
    if (auto v = go.opt("kp_pos")) c.gains.K_P_pos = mat3(v->get(), go.where("kp_pos"));
    if (auto v = go.opt("kd_pos")) c.gains.K_D_pos = mat3(v->get(), go.where("kd_pos"));
    if (auto v = go.opt("kp_ang")) c.gains.K_P_ang = mat3(v->get(), go.where("kp_ang"));
    if (auto v = go.opt("kd_ang")) c.gains.K_D_ang = mat3(v->get(), go.where("kd_ang"));
    go.finish();
  }
  if (auto t = o.opt("tracking")) c.tracking = parse_qp_weights(t->get(), "controller.tracking", c.tracking);
  if (auto l = o.opt("landing")) c.landing = parse_qp_weights(l->get(), "controller.landing", c.landing);
  read_number(o, "force_phase_duration", c.force_phase_duration);
  read_number(o, "force_ramp_time", c.force_ramp_time);
  o.finish();
  return c;
}

detection::DetectorConfig parse_detector(const json& j) {
  Obj o(j, "detector");
  detection::DetectorConfig d;
  read_int(o, "window", d.window);
  read_number(o, "threshold", d.threshold);
  read_number(o, "arm_time", d.arm_time);
  read_number(o, "descent_speed", d.descent_speed);
  o.finish();
  return d;
}

void parse_sim(const json& j, sim::SimConfig& s, sim::GroundModel& g) {
  Obj o(j, "sim");
  read_number(o, "control_rate", s.control_rate);
  read_int(o, "substeps", s.substeps);
  read_number(o, "noise_sigma", s.noise_sigma);
  if (auto v = o.opt("seed")) {
    if (!v->get().is_number_unsigned() && !(v->get().is_number_integer() && v->get().get<long long>() >= 0)) {
      throw SchemaError("sim.seed must be a nonnegative integer");
    }
    s.seed = v->get().get<std::uint64_t>();
  }
  read_number(o, "duration", s.duration);
  read_number(o, "settle_time", s.settle_time);
  if (auto gj = o.opt("ground")) {
    Obj go(gj->get(), "sim.ground");
    read_number(go, "z_g", g.z_g);
    read_number(go, "k_n", g.k_n);
    read_number(go, "d_n", g.d_n);
    read_number(go, "mu", g.mu);
    if (auto ps = go.opt("platforms")) {
      if (!ps->get().is_array()) throw SchemaError("sim.ground.platforms must be an array");
      for (std::size_t i = 0; i < ps->get().size(); ++i) {
        Obj po(ps->get()[i], "sim.ground.platforms[" + std::to_string(i) + "]");
        sim::Platform p;
        read_number(po, "x_min", p.x_min);
        read_number(po, "x_max", p.x_max);
        read_number(po, "y_min", p.y_min);
        read_number(po, "y_max", p.y_max);
        p.height = number(po.at("height"), po.where("height"));
        read(po, "in_flight", p.in_flight, boolean);
        po.finish();
        g.platforms.push_back(p);
      }
    }
    go.finish();
  }
  o.finish();
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

transcription::PhaseSchedule Scenario::schedule() const { return transcription::PhaseSchedule::jump(task, segments); }

model::RobotModel Scenario::model(Variant v) const {
  if (v == Variant::LlSrbm) return robot;
  if (plan_kind == PlanKind::Drop) {
    std::vector<Vec3> feet;
    double z = 0.0;
    for (const Vec3& f : drop.feet_body) z -= f.z() / static_cast<double>(drop.feet_body.size());
    for (const Vec3& f : drop.feet_body) feet.push_back(Vec3(0, 0, z) + f);
    return robot.srbm_equivalent(Vec3(0, 0, z), feet);
  }
  return robot.srbm_equivalent(task.x_ini.r, task.feet_ini);
}

std::string Scenario::plan_hash(Variant v) const {
  json key;
  for (const char* block : {"robot", "task", "drop", "schedule", "weights", "transcription", "solver"}) {
    if (source.contains(block)) key[block] = source.at(block);
  }
  key["robot"].erase("model");
  key["variant"] = to_string(v);
  return fnv1a(key.dump());
}

Scenario parse(const json& doc) {
  Obj o(doc, "scenario");
  Scenario s;
  s.source = doc;
  const int version = integer(o.at("schema_version"), "scenario.schema_version");
  if (version != kSchemaVersion) {
    throw SchemaError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  s.name = text(o.at("name"), "scenario.name");
  if (auto d = o.opt("description")) s.description = text(d->get(), "scenario.description");
  s.robot = parse_robot(o.at("robot"), s.variant);

  const bool has_task = o.has("task");
  const bool has_drop = o.has("drop");
  if (has_task == has_drop) throw SchemaError("scenario needs exactly one of task or drop");
  if (has_task) {
    s.plan_kind = PlanKind::Optimize;
    s.task = parse_task(o.at("task"));
  } else {
    s.plan_kind = PlanKind::Drop;
    s.drop = parse_drop(o.at("drop"));
    if (s.drop.feet_body.size() != s.robot.leg_count()) throw SchemaError("drop.feet_body needs one entry per leg");
  }
  if (auto j = o.opt("schedule")) s.segments = parse_schedule(j->get());
  if (auto j = o.opt("weights")) s.weights = parse_weights(j->get());
  if (auto j = o.opt("transcription")) s.transcription = parse_transcription(j->get());
  if (auto j = o.opt("solver")) s.solver = parse_solver(j->get());
  if (auto j = o.opt("controller")) s.controller = parse_controller(j->get());
  if (auto j = o.opt("detector")) s.detector = parse_detector(j->get());
  if (auto j = o.opt("sim")) parse_sim(j->get(), s.sim, s.ground);
  o.finish();

  try {
    if (s.plan_kind == PlanKind::Optimize) {
      s.task.validate(s.robot);
      s.schedule().validate(s.robot.leg_count());
      if (s.schedule().total_segments() != s.task.N) throw InconsistentSchedule("schedule segments do not sum to N");
    }
    s.weights.validate();
    s.solver.validate();
    s.controller.validate();
    s.detector.validate();
    s.sim.validate();
    s.ground.validate();
    if (!(s.transcription.swing_clearance >= 0.0)) throw InvalidModel("swing clearance must be nonnegative");
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(e.what());
  }
  return s;
}

Scenario load(const std::string& path) {
  const std::string content = read_file(path);
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return parse(doc);
}

transcription::PlanResult make_plan(const Scenario& s, Variant v) {
  const model::RobotModel m = s.model(v);
  if (s.plan_kind == PlanKind::Drop) {
    transcription::PlanResult r;
    r.trajectory = sim::drop_plan(m, s.drop);
    r.report.status = solver::SolveStatus::Converged;
    return r;
  }
  return transcription::plan_jump(s.task, s.schedule(), s.weights, m, s.transcription, s.solver);
}

}  // namespace lljump::scenario
