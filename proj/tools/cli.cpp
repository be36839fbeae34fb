#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "lljump/scenario.hpp"

namespace lljump::cli {

namespace {

namespace fs = std::filesystem;
using model::Vec3;
using nlohmann::json;

enum class Verbosity { Quiet, Info, Debug };

// LLJUMP_LOG=quiet|info|debug; anything else means info.
Verbosity verbosity() {
  const char* v = std::getenv("LLJUMP_LOG");
  if (!v) return Verbosity::Info;
  const std::string s(v);
  if (s == "quiet") return Verbosity::Quiet;
  if (s == "debug") return Verbosity::Debug;
  return Verbosity::Info;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  Verbosity level{verbosity()};

  void info(const std::string& msg) const {
    if (level != Verbosity::Quiet) err << msg << '\n';
  }
};

// Thrown for bad arguments that CLI11 cannot check on its own.
struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(what) {}
};

std::string fixed(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

solver::NlpSolverConfig solver_config(const scenario::Scenario& s, const Context& ctx) {
  solver::NlpSolverConfig c = s.solver;
  if (ctx.level == Verbosity::Debug) c.verbose = true;
  return c;
}

json plan_meta(const scenario::Scenario& s, scenario::Variant v, const transcription::PlanResult& r,
               const model::RobotModel& m) {
  const auto e = sim::open_loop_error(r.trajectory, m);
  json meta;
  meta["scenario"] = s.name;
  meta["model"] = scenario::to_string(v);
  meta["plan_hash"] = s.plan_hash(v);
  meta["report"] = r.report;
  meta["open_loop_error"] = {{"com_m", e.com}, {"orientation_deg", e.orientation}};
  return meta;
}

// --- plan ------------------------------------------------------------------

struct PlanArgs {
  std::string scenario;
  std::string model;
  std::string out;
};

int cmd_plan(const PlanArgs& a, const Context& ctx) {
  scenario::Scenario s = scenario::load(a.scenario);
  const scenario::Variant v = a.model.empty() ? s.variant : scenario::variant_from_string(a.model);
  s.solver = solver_config(s, ctx);
  const model::RobotModel m = s.model(v);
  ctx.info("planning " + s.name + " with the " + scenario::to_string(v) + " model");
  const auto r = scenario::make_plan(s, v);
  const std::string base = trajectory_base(a.out);
  ensure_parent(base);
  save_trajectory(r.trajectory, base, plan_meta(s, v, r, m));
  ctx.out << "status: " << solver::to_string(r.report.status) << "\n"
          << "outer iterations: " << r.report.iterations << "\n"
          << "constraint violation: " << r.report.constraint_violation << "\n"
          << "kkt residual: " << r.report.kkt_residual << "\n"
          << "duration: " << fixed(r.trajectory.duration()) << " s\n"
          << "wall time: " << fixed(r.report.wall_time_s, 2) << " s\n"
          << "written: " << base << ".csv\n";
  return r.report.converged() ? kOk : kSolverFailed;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string plan;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::optional<double> duration;
  std::vector<std::string> perturb;
};

// A board of the given height over the planned landing footprint, slid in
// during flight.
sim::Platform landing_board(const Trajectory& plan, const model::RobotModel& m, double height) {
  int k = plan.first_knot_of(PhaseKind::PostLanding);
  if (k < 0) k = static_cast<int>(plan.knot_count()) - 1;
  const auto pts = model::contact_points(plan.states[k].q.normalized(), plan.controls[k].feet, m);
  sim::Platform p;
  p.x_min = p.y_min = 1e300;
  p.x_max = p.y_max = -1e300;
  for (const Vec3& q : pts) {
    p.x_min = std::min(p.x_min, q.x());
    p.x_max = std::max(p.x_max, q.x());
    p.y_min = std::min(p.y_min, q.y());
    p.y_max = std::max(p.y_max, q.y());
  }
  const double margin = 0.2;
  p.x_min -= margin;
  p.y_min -= margin;
  p.x_max += margin;
  p.y_max += margin;
  p.height = height;
  p.in_flight = true;
  return p;
}

int cmd_simulate(const SimulateArgs& a, const Context& ctx) {
  const scenario::Scenario s = scenario::load(a.scenario);
  json meta;
  const Trajectory plan = load_trajectory(a.plan, &meta);
  if (!meta.contains("plan_hash") || !meta.contains("model")) {
    throw SchemaError(a.plan + " carries no plan provenance; make it with 'lljump plan'");
  }
  const scenario::Variant v = scenario::variant_from_string(meta.at("model").get<std::string>());
  if (meta.at("plan_hash").get<std::string>() != s.plan_hash(v)) {
    throw SchemaError("plan " + a.plan + " was not made from scenario " + a.scenario);
  }

  sim::SimConfig cfg = s.sim;
  if (a.seed) cfg.seed = *a.seed;
  if (a.noise) cfg.noise_sigma = *a.noise;
  if (a.duration) cfg.duration = *a.duration;
  sim::GroundModel ground = s.ground;
  for (const std::string& p : a.perturb) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || p.substr(0, eq) != "platform") {
      throw UsageError("unknown perturbation '" + p + "' (expected platform=HEIGHT)");
    }
    double h = 0.0;
    try {
      std::size_t used = 0;
      h = std::stod(p.substr(eq + 1), &used);
      if (used != p.size() - eq - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw UsageError("platform height must be a number in metres: '" + p + "'");
    }
    ground.platforms.push_back(landing_board(plan, s.robot, h));
  }

  ctx.info("simulating " + s.name + " (seed " + std::to_string(cfg.seed) + ")");
  // The simulated robot is always the lump-leg model, whatever planned it.
  sim::RunLog log = sim::run_closed_loop(plan, s.robot, s.controller, s.detector, cfg, ground);
  log.config["scenario"] = s.name;
  log.config["plan_model"] = scenario::to_string(v);
  log.config["perturb"] = a.perturb;
  const std::string base = trajectory_base(a.out);
  ensure_parent(base);
  sim::save_runlog(log, base);

  const double planned = plan.phase_start(PhaseKind::PostLanding);
  const auto det = log.first(sim::kContactDetected);
  ctx.out << "planned landing: " << fixed(planned) << " s\n"
          << "contact detected: " << (det ? fixed(*det) + " s" : std::string("none")) << "\n";
  if (auto pen = log.first(sim::kFirstPenetration)) ctx.out << "first penetration: " << fixed(*pen) << " s\n";
  if (det) {
    const auto settled = sim::settle_time(log, *det, 0.05);
    ctx.out << "settled (|v_com| < 0.05 m/s): " << (settled ? fixed(*settled) + " s" : std::string("no")) << "\n";
  }
  ctx.out << "written: " << base << ".csv\n";
  return kOk;
}

// --- compare ---------------------------------------------------------------

struct CompareArgs {
  std::string scenario;
  std::string out;
  bool simulate{false};
  bool identical{false};
};

int cmd_compare(const CompareArgs& a, const Context& ctx) {
  scenario::Scenario s = scenario::load(a.scenario);
  if (s.plan_kind != scenario::PlanKind::Optimize) throw SchemaError("compare needs a scenario with a task block");
  s.solver = solver_config(s, ctx);
  sim::CompareOptions opt;
  opt.transcription = s.transcription;
  opt.solver = s.solver;
  opt.simulate = a.simulate;
  opt.sim = s.sim;
  opt.controller = s.controller;
  opt.detector = s.detector;
  opt.ground = s.ground;
  const model::RobotModel ll = s.model(scenario::Variant::LlSrbm);
  const model::RobotModel srb = a.identical ? ll : s.model(scenario::Variant::Srbm);
  ctx.info("comparing models on " + s.name);
  const auto rep = sim::compare_models(s.task, s.schedule(), s.weights, ll, srb, opt);

  fs::create_directories(a.out);
  const std::string dir = fs::path(a.out).string();
  write_file_atomic(dir + "/report.md", rep.to_markdown());
  write_file_atomic(dir + "/profiles.csv", rep.profiles_csv());
  for (const auto* side : {&rep.ll, &rep.srb}) {
    if (side->plan.knot_count() == 0) continue;
    transcription::PlanResult r{side->plan, side->report};
    const auto v = side == &rep.ll ? scenario::Variant::LlSrbm : scenario::Variant::Srbm;
    save_trajectory(side->plan, dir + "/" + side->label, plan_meta(s, v, r, side == &rep.ll ? ll : srb));
  }
  ctx.out << rep.to_markdown();
  if (!rep.both_solved()) {
    if (!rep.ll.solved) ctx.err << "llsrbm: " << rep.ll.error << '\n';
    if (!rep.srb.solved) ctx.err << "srbm: " << rep.srb.error << '\n';
    return kSolverFailed;
  }
  return kOk;
}

// --- detect ----------------------------------------------------------------

struct DetectArgs {
  std::string runlog;
  std::string scenario;
  std::string out;
  std::optional<int> window;
  std::optional<double> threshold;
  std::optional<double> arm_time;
  std::optional<double> descent_speed;
};

int cmd_detect(const DetectArgs& a, const Context& ctx) {
  const sim::RunLog log = sim::load_runlog(a.runlog);
  detection::DetectorConfig cfg;
  if (!a.scenario.empty()) cfg = scenario::load(a.scenario).detector;
  if (a.window) cfg.window = *a.window;
  if (a.threshold) cfg.threshold = *a.threshold;
  if (a.arm_time) cfg.arm_time = *a.arm_time;
  if (a.descent_speed) cfg.descent_speed = *a.descent_speed;
  try {
    cfg.validate();
  } catch (const InvalidModel& e) {
    throw UsageError(e.what());
  }
  const auto t = sim::replay_detection(log, cfg);
  ctx.out << "detection: " << (t ? fixed(*t) : std::string("none")) << '\n';
  if (!a.out.empty()) {
    std::ostringstream csv;
    csv << "t,vg_observed,vg_true,dvg_observed\n" << std::setprecision(17);
    for (std::size_t k = 0; k < log.rows.size(); ++k) {
      const auto& r = log.rows[k];
      const double rate = k == 0 ? 0.0 : (r.vg_observed - log.rows[k - 1].vg_observed) / (r.t - log.rows[k - 1].t);
      csv << r.t << ',' << r.vg_observed << ',' << r.vg_true << ',' << rate << '\n';
    }
    ensure_parent(a.out);
    write_file_atomic(a.out, csv.str());
  }
  return kOk;
}

// --- plot ------------------------------------------------------------------

struct PlotArgs {
  std::string kind;
  std::string input;
  std::string scenario;
  std::string out;
};

double tilt_deg(const model::Quaternion& q) {
  const double c = std::clamp(model::quat_to_rot(q)(2, 2), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

int cmd_plot(const PlotArgs& a, const Context&) {
  std::ostringstream csv;
  csv << "t,series,value\n" << std::setprecision(12);
  auto emit = [&](double t, const std::string& name, double v) { csv << t << ',' << name << ',' << v << '\n'; };
  auto emit3 = [&](double t, const std::string& name, const Vec3& v) {
    emit(t, name + "_x", v.x());
    emit(t, name + "_y", v.y());
    emit(t, name + "_z", v.z());
  };
  if (a.kind == "plan") {
    if (a.scenario.empty()) throw UsageError("plot plan needs --scenario for the robot model");
    const scenario::Scenario s = scenario::load(a.scenario);
    json meta;
    const Trajectory plan = load_trajectory(a.input, &meta);
    const auto v = meta.contains("model") ? scenario::variant_from_string(meta.at("model").get<std::string>())
                                          : s.variant;
    const model::RobotModel m = s.model(v);
    for (std::size_t k = 0; k < plan.knot_count(); ++k) {
      const double t = plan.t[k];
      const auto& x = plan.states[k];
      const auto& feet = plan.controls[k].feet;
      emit3(t, "r", x.r);
      emit(t, "yaw_deg", model::yaw_of(x.q) * 180.0 / M_PI);
      emit(t, "tilt_deg", tilt_deg(x.q));
      emit3(t, "H", x.H);
      emit3(t, "L", x.L);
      emit3(t, "omega", model::angular_velocity(x, feet, m));
      emit(t, "izz", model::centroidal_inertia(x.q, x.r, feet, m)(2, 2));
      double fz = 0.0;
      for (const Vec3& f : plan.controls[k].forces) fz += f.z();
      emit(t, "fz_total", fz);
      for (std::size_t i = 0; i < feet.size(); ++i) emit3(t, "foot" + std::to_string(i), feet[i]);
    }
  } else if (a.kind == "runlog") {
    const sim::RunLog log = sim::load_runlog(a.input);
    for (const auto& r : log.rows) {
      emit3(r.t, "r", r.x.r);
      emit(r.t, "yaw_deg", model::yaw_of(r.x.q) * 180.0 / M_PI);
      emit(r.t, "tilt_deg", tilt_deg(r.x.q));
      emit(r.t, "vg_observed", r.vg_observed);
      emit(r.t, "vg_true", r.vg_true);
      emit(r.t, "penetration", r.penetration);
      emit(r.t, "force_tracking", r.mode == controller::Mode::ForceTracking ? 1.0 : 0.0);
      double fz = 0.0;
      for (const Vec3& f : r.forces) fz += f.z();
      emit(r.t, "fz_total", fz);
    }
  } else {
    throw UsageError("plot kind must be plan or runlog");
  }
  ensure_parent(a.out);
  write_file_atomic(a.out, csv.str());
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Jump planning, control and contact detection with the lump-leg rigid body model.\n"
               "Exit codes: 0 success, 1 usage/schema/IO error, 2 solver failure, 3 simulation blow-up.\n"
               "Set LLJUMP_LOG=quiet|info|debug to control diagnostics on standard error.",
               "lljump"};
  app.require_subcommand(1);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Optimize a jump and write the trajectory (CSV plus JSON sidecar)");
  p->add_option("scenario", plan.scenario, "Scenario file")->required();
  p->add_option("--model", plan.model, "Planning model: llsrbm or srbm (default: the scenario's)")
      ->check(CLI::IsMember({"llsrbm", "srbm"}));
  p->add_option("-o,--out", plan.out, "Output path; .csv and .json are written")->required();

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Run the plan in closed loop and write the run log");
  s->add_option("plan", simulate.plan, "Plan written by 'lljump plan'")->required();
  s->add_option("scenario", simulate.scenario, "Scenario the plan was made from")->required();
  s->add_option("--seed", simulate.seed, "Noise seed (default: the scenario's)");
  s->add_option("--noise", simulate.noise, "Observation noise sigma in m/s and rad/s (default: the scenario's)");
  s->add_option("--duration", simulate.duration, "Simulated time in s (default: plan plus settle time)");
  s->add_option("--perturb", simulate.perturb,
                "platform=HEIGHT slides a board of HEIGHT metres under the landing footprint during flight");
  s->add_option("-o,--out", simulate.out, "Output path; .csv and .json are written")->required();

  CompareArgs compare;
  auto* c = app.add_subcommand("compare", "Plan with both models and write a comparison report");
  c->add_option("scenario", compare.scenario, "Scenario file with a task block")->required();
  c->add_option("-o,--out", compare.out, "Output directory")->required();
  c->add_flag("--simulate", compare.simulate, "Also run both plans in closed loop");
  c->add_flag("--identical", compare.identical, "Use the lump-leg model on both sides (sanity check)");

  DetectArgs detect;
  auto* d = app.add_subcommand("detect", "Replay contact detection over a run log");
  d->add_option("runlog", detect.runlog, "Run log written by 'lljump simulate'")->required();
  d->add_option("--scenario", detect.scenario, "Take detector settings from this scenario");
  d->add_option("--window", detect.window, "Number of consecutive derivatives below the threshold");
  d->add_option("--threshold", detect.threshold, "Derivative threshold on the velocity norm, 1/s");
  d->add_option("--arm-time", detect.arm_time, "Delay after takeoff before detection may fire, s");
  d->add_option("--descent-speed", detect.descent_speed, "Vertical speed below which the detector arms, m/s");
  d->add_option("-o,--out", detect.out, "Write the velocity-norm series as CSV");

  PlotArgs plot;
  auto* g = app.add_subcommand("plot", "Emit tidy CSV (t, series, value) for external plotting");
  g->add_option("kind", plot.kind, "plan or runlog")->required()->check(CLI::IsMember({"plan", "runlog"}));
  g->add_option("input", plot.input, "Plan or run log")->required();
  g->add_option("--scenario", plot.scenario, "Scenario (needed for plans)");
  g->add_option("-o,--out", plot.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageOrIo;
  }

  try {
    if (p->parsed()) return cmd_plan(plan, ctx);
    if (s->parsed()) return cmd_simulate(simulate, ctx);
    if (c->parsed()) return cmd_compare(compare, ctx);
    if (d->parsed()) return cmd_detect(detect, ctx);
    if (g->parsed()) return cmd_plot(plot, ctx);
  } catch (const NumericalBlowup& e) {
    err << "error: " << e.what() << '\n';
    return kBlowup;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return kUsageOrIo;
  }
  return kUsageOrIo;
}

}  // namespace lljump::cli
