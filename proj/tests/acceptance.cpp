// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.
//
//   acceptance [--only 1,4,8] [--scenarios DIR]

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "lljump/controller.hpp"
#include "lljump/scenario.hpp"
#include "lljump/sim.hpp"
#include "lljump/solver/qp.hpp"
#include "qp_oracle.hpp"
#include "srbm_oracle.hpp"

using namespace lljump;
using model::Mat3;
using model::Quaternion;
using model::RobotModel;
using model::State;
using model::Vec3;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

std::string fix(double v, int prec = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

Quaternion random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

std::vector<Vec3> rigid_feet(const State& x, const std::vector<Vec3>& rel) {
  std::vector<Vec3> out;
  const Mat3 R = model::quat_to_rot(x.q);
  for (const Vec3& p : rel) out.push_back(x.r + R * p);
  return out;
}

struct Env {
  std::string scenario_dir;
  // Shared between criteria 4/5/10 and 8/9/10.
  std::map<std::string, transcription::PlanResult> plans;
  std::vector<sim::RunLog> drops;
};

scenario::Scenario load_scenario(const Env& env, const std::string& name) {
  return scenario::load(env.scenario_dir + "/" + name + ".json");
}

RobotModel quadruped(const Env& env) { return load_scenario(env, "quad_twist90").robot; }

// 1. Flight conservation under RK4.
Outcome conservation(Env& env) {
  const RobotModel m = quadruped(env);
  std::mt19937_64 rng(1);
  const double dt = 2.5e-3;
  double worst_L = 0.0, worst_H = 0.0, worst_q = 0.0;
  for (int run = 0; run < 10000; ++run) {
    State x;
    x.r = random_vec(rng, 1.0);
    x.q = random_quat(rng);
    x.H = random_vec(rng, 40.0);
    x.L = random_vec(rng, 5.0);
    std::vector<Vec3> rel;
    for (int i = 0; i < 4; ++i) rel.push_back(random_vec(rng, 0.5));
    const State x0 = x;
    model::Control u = model::Control::zero(m);
    for (int k = 0; k < 100; ++k) {
      u.feet = rigid_feet(x, rel);
      x = model::integrate_step(x, u, dt, m);
    }
    const double t = 100 * dt;
    worst_L = std::max(worst_L, (x.L - x0.L).norm() / x0.L.norm());
    worst_H = std::max(worst_H, (x.H - x0.H - m.total_mass() * m.gravity.g * t).norm());
    worst_q = std::max(worst_q, std::abs(x.q.norm() - 1.0));
  }
  return {worst_L <= 1e-10 && worst_H <= 1e-9 && worst_q <= 1e-12,
          "max |dL|/|L| " + sci(worst_L) + " (<= 1e-10), max |H - H0 - mgt| " + sci(worst_H) +
              " (<= 1e-9), max | |q| - 1 | " + sci(worst_q) + " (<= 1e-12)"};
}

// 2. Zero leg mass agrees with an independent single-body implementation.
Outcome srbm_equivalence(Env& env) {
  const RobotModel srbm = quadruped(env).srbm_twin();
  const srbm_oracle::Body body{srbm.total_mass(), srbm.body_inertia};
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    State x;
    x.r = random_vec(rng, 1.0);
    x.q = random_quat(rng);
    x.H = random_vec(rng, 30.0);
    x.L = random_vec(rng, 5.0);
    model::Control u = model::Control::zero(srbm);
    for (std::size_t k = 0; k < 4; ++k) {
      u.feet[k] = x.r + random_vec(rng, 0.5);
      u.forces[k] = random_vec(rng, 200.0);
    }
    const auto eq = srbm_oracle::to_eigen(x.q.x, x.q.y, x.q.z, x.q.w);
    const auto ref = srbm_oracle::derivative(body, x.r, eq, x.H, x.L, u.feet, u.forces);
    const auto d = model::dynamics(x, u, srbm);
    worst = std::max({worst, (d.r_dot - ref.r_dot).norm(), (d.q_dot - ref.q_dot).norm(),
                      (d.H_dot - ref.H_dot).norm(), (d.L_dot - ref.L_dot).norm()});
    worst = std::max(worst, (model::centroidal_inertia(x.q, x.r, u.feet, srbm) - srbm_oracle::world_inertia(body, eq))
                                .norm());
    // Without leg mass the system CoM is the body CoM.
    worst = std::max(worst, (model::system_com(x.r, u.feet, srbm) - x.r).norm());
    worst = std::max(worst, (model::body_position_from_com(x.r, u.feet, srbm) - x.r).norm());
  }
  return {worst <= 1e-12, "max deviation over dynamics, inertia and CoM " + sci(worst) + " (<= 1e-12)"};
}

// 3. Pulling a foot toward the body yaw axis lowers the inertia about it.
Outcome inertia_shaping(Env& env) {
  const RobotModel m = quadruped(env);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> frac(0.05, 1.0);
  int failures = 0;
  double smallest = 1e300;
  for (int i = 0; i < 1000; ++i) {
    const Quaternion q = random_quat(rng);
    const Vec3 r = random_vec(rng, 1.0);
    const Mat3 R = model::quat_to_rot(q);
    const Vec3 n = R.col(2);
    std::vector<Vec3> feet;
    for (int k = 0; k < 4; ++k) feet.push_back(r + R * (m.legs[k].attach_offset + random_vec(rng, 0.4)));
    const std::size_t leg = static_cast<std::size_t>(i % 4);
    const Vec3 d = feet[leg] - r;
    const Vec3 radial = d - d.dot(n) * n;
    if (radial.norm() < 1e-6) continue;
    std::vector<Vec3> moved = feet;
    moved[leg] -= frac(rng) * radial;
    const double before = model::centroidal_inertia_body(q, r, feet, m)(2, 2);
    const double after = model::centroidal_inertia_body(q, r, moved, m)(2, 2);
    smallest = std::min(smallest, before - after);
    if (!(after < before)) ++failures;
  }

  // Two 1.5 kg lumps at the feet, tucked from radius 0.4 m to 0.1 m:
  // the drop is 2 * 1.5 * (0.4^2 - 0.1^2).
  RobotModel two;
  two.body_mass = 5.0;
  two.body_inertia = Mat3::Identity();
  two.legs = {{1.5, Vec3::Zero(), 0.0}, {1.5, Vec3::Zero(), 0.0}};
  const Vec3 com(0, 0, 0.5);
  const double wide = model::centroidal_inertia(Quaternion{}, com, {Vec3(0.4, 0, 0), Vec3(-0.4, 0, 0)}, two)(2, 2);
  const double tight = model::centroidal_inertia(Quaternion{}, com, {Vec3(0.1, 0, 0), Vec3(-0.1, 0, 0)}, two)(2, 2);
  const double closed_form = 2 * 1.5 * (0.16 - 0.01);
  const double err = std::abs((wide - tight) - closed_form);
  return {failures == 0 && err <= 1e-12,
          std::to_string(1000 - failures) + "/1000 random cases decrease (smallest drop " + sci(smallest) +
              "), two-lump example error " + sci(err)};
}

transcription::PlanResult& plan_of(Env& env, const std::string& name) {
  auto it = env.plans.find(name);
  if (it == env.plans.end()) {
    const auto s = load_scenario(env, name);
    it = env.plans.emplace(name, scenario::make_plan(s, s.variant)).first;
  }
  return it->second;
}

// 4. Bundled scenarios converge and the plans roll out open loop.
Outcome planner_convergence(Env& env) {
  bool pass = true;
  std::string detail;
  for (const std::string name : {"quad_twist90", "quad_fwd30"}) {
    const auto s = load_scenario(env, name);
    const auto& r = plan_of(env, name);
    const auto e = sim::open_loop_error(r.trajectory, s.model());
    const bool ok = r.report.converged() && r.report.constraint_violation <= 1e-4 && r.report.kkt_residual <= 1e-4 &&
                    r.report.iterations <= 500 && e.com <= 5e-3 && e.orientation <= 2.0 &&
                    r.report.wall_time_s < 600.0;
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += name + ": " + solver::to_string(r.report.status) + " in " + std::to_string(r.report.iterations) +
              " outer iterations, violation " + sci(r.report.constraint_violation) + ", kkt " +
              sci(r.report.kkt_residual) + ", rollout drift " + sci(e.com) + " m / " + sci(e.orientation) +
              " deg, " + fix(r.report.wall_time_s, 1) + " s";
  }
  return {pass, detail};
}

// 5. The lump-leg plan turns at least as fast and tucks its feet.
Outcome model_comparison(Env& env) {
  const auto s = load_scenario(env, "quad_twist90");
  sim::CompareOptions opt;
  opt.transcription = s.transcription;
  opt.solver = s.solver;
  const auto rep = sim::compare_models(s.task, s.schedule(), s.weights, s.model(scenario::Variant::LlSrbm),
                                       s.model(scenario::Variant::Srbm), opt);
  if (!rep.both_solved()) return {false, "solve failed: " + rep.ll.error + " / " + rep.srb.error};
  const double t_ll = rep.ll.metrics.time_to_target;
  const double t_srb = rep.srb.metrics.time_to_target;
  const double d_ll = rep.ll.metrics.flight_mean_axis_distance;
  const double d_srb = rep.srb.metrics.flight_mean_axis_distance;
  const bool pass = t_ll >= 0.0 && t_srb > 0.0 && t_ll <= 1.05 * t_srb && d_ll < d_srb;
  return {pass, "time to 90 deg " + fix(t_ll, 4) + " s vs " + fix(t_srb, 4) + " s (ratio " + fix(t_ll / t_srb, 4) +
                    " <= 1.05), mean foot-to-axis distance " + fix(d_ll, 4) + " m vs " + fix(d_srb, 4) + " m"};
}

// 6. QP solver against brute-force active-set enumeration.
Outcome qp_oracle_check(Env&) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> nd(1, 10), md(0, 8);
  std::normal_distribution<double> N(0.0, 1.0);
  double worst_gap = 0.0, worst_viol = 0.0;
  int solved = 0, feasible = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = nd(rng);
    const int m_total = md(rng);
    const int m_eq = std::min(n - 1, m_total / 4);
    const int m_in = m_total - m_eq;
    qp_oracle::Problem p;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = N(rng);
    p.G = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    p.g = Eigen::VectorXd(n);
    for (auto& v : p.g) v = 3.0 * N(rng);
    Eigen::VectorXd z0(n);
    for (auto& v : z0) v = N(rng);
    p.A_eq = Eigen::MatrixXd(m_eq, n);
    p.A_in = Eigen::MatrixXd(m_in, n);
    for (int i = 0; i < m_eq; ++i)
      for (int j = 0; j < n; ++j) p.A_eq(i, j) = N(rng);
    for (int i = 0; i < m_in; ++i)
      for (int j = 0; j < n; ++j) p.A_in(i, j) = N(rng);
    p.b_eq = p.A_eq * z0;
    p.b_in = p.A_in * z0 + Eigen::VectorXd::Constant(m_in, 0.5);
    const auto oracle = qp_oracle::enumerate(p);
    if (!oracle) continue;
    ++feasible;
    const solver::QpProblem qp{p.G, p.g, p.A_eq, p.b_eq, p.A_in, p.b_in, {}, {}};
    const auto r = solver::solve_qp(qp);
    if (!r.report.converged()) {
      worst_gap = std::max(worst_gap, 1e300);
      continue;
    }
    ++solved;
    worst_gap = std::max(worst_gap, std::abs(r.report.objective - oracle->objective));
    worst_viol = std::max(worst_viol, qp.violation(r.z));
  }
  return {feasible == 500 && solved == 500 && worst_gap <= 1e-6 && worst_viol <= 1e-8,
          std::to_string(solved) + "/500 solved, max objective gap " + sci(worst_gap) + " (<= 1e-6), max violation " +
              sci(worst_viol) + " (<= 1e-8)"};
}

// 7. Zero commands on four feet share the weight evenly.
Outcome static_stance(Env& env) {
  const RobotModel m = quadruped(env);
  const auto s = load_scenario(env, "quad_twist90");
  State x = s.task.x_ini;
  const auto pts = s.task.feet_ini;
  const auto r = controller::solve_force_qp(x, {}, pts, {}, controller::ControllerWeights::tracking(), m);
  const double fz = m.total_mass() * 9.81 / 4.0;
  double dz = 0.0, dt = 0.0;
  bool pyramid = true;
  for (const Vec3& f : r.forces) {
    dz = std::max(dz, std::abs(f.z() - fz));
    dt = std::max(dt, f.head<2>().norm());
    pyramid = pyramid && std::abs(f.x()) <= m.mu * f.z() + 1e-12 && std::abs(f.y()) <= m.mu * f.z() + 1e-12 &&
              f.z() >= 0.0 && f.z() <= m.f_max_z;
  }
  return {dz <= 1e-6 && dt <= 1e-6 && pyramid, "max |f_z - mg/4| " + sci(dz) + " N, max tangential " + sci(dt) +
                                                   " N, pyramid " + (pyramid ? "satisfied" : "violated")};
}

std::vector<sim::RunLog> run_drops(const Env& env) {
  const auto s = load_scenario(env, "quad_drop");
  const Trajectory plan = scenario::make_plan(s, s.variant).trajectory;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> offset(-0.03, 0.03);
  std::vector<sim::RunLog> logs;
  for (int run = 0; run < 100; ++run) {
    sim::GroundModel g = s.ground;
    g.z_g += offset(rng);
    sim::SimConfig cfg = s.sim;
    cfg.noise_sigma = 0.05;
    cfg.seed = static_cast<std::uint64_t>(run);
    logs.push_back(sim::run_closed_loop(plan, s.robot, s.controller, s.detector, cfg, g));
  }
  return logs;
}

// 8. Seeded drops onto offset ground with noisy observations.
Outcome contact_detection(Env& env) {
  env.drops = run_drops(env);
  int in_time = 0, clean = 0, settled = 0;
  double worst_latency = 0.0;
  for (const auto& log : env.drops) {
    const auto pen = log.first(sim::kFirstPenetration);
    const auto det = log.first(sim::kContactDetected);
    if (pen && det && *det >= *pen && *det - *pen <= 0.025 + 1e-9) ++in_time;
    if (pen && det) worst_latency = std::max(worst_latency, *det - *pen);
    if (!(det && (!pen || *det < *pen))) ++clean;
    const auto ft = log.first(sim::kForceTrackingStart);
    if (det && ft && *ft == *det) {
      const auto st = sim::settle_time(log, *det, 0.05);
      if (st && *st - *det <= 1.0) ++settled;
    }
  }
  return {in_time >= 95 && clean >= 95 && settled >= 90,
          "detected within 25 ms " + std::to_string(in_time) + "/100 (>= 95, worst latency " +
              fix(worst_latency * 1e3, 1) + " ms), no flight false positive " + std::to_string(clean) +
              "/100 (>= 95), force tracking then settled within 1 s " + std::to_string(settled) + "/100 (>= 90)"};
}

// 9. Force tracking lasts 0.2 s to within one control period.
Outcome mode_timing(Env& env) {
  if (env.drops.empty()) env.drops = run_drops(env);
  int ok = 0;
  double worst = 0.0;
  for (const auto& log : env.drops) {
    const auto a = log.first(sim::kForceTrackingStart);
    const auto b = log.first(sim::kForceTrackingEnd);
    if (!a || !b) {
      worst = 1e300;
      continue;
    }
    const double err = std::abs(*b - *a - 0.2);
    worst = std::max(worst, err);
    if (err <= 1.0 / log.control_rate + 1e-9) ++ok;
  }
  return {ok == static_cast<int>(env.drops.size()) && ok > 0,
          std::to_string(ok) + "/" + std::to_string(env.drops.size()) + " runs within one period, worst |duration - 0.2| " +
              fix(worst * 1e3, 3) + " ms"};
}

std::string trajectory_text(const Trajectory& t) {
  std::ostringstream os;
  write_trajectory_csv(t, os);
  return os.str();
}

// 10. Re-running criteria 4 and 8 reproduces every log bit for bit.
Outcome determinism(Env& env) {
  bool pass = true;
  std::string detail;
  for (const std::string name : {"quad_twist90", "quad_fwd30"}) {
    const auto s = load_scenario(env, name);
    const auto& first = plan_of(env, name);
    const auto again = scenario::make_plan(s, s.variant);
    auto a = first.report, b = again.report;
    a.wall_time_s = b.wall_time_s = 0.0;
    const bool same_plan = trajectory_text(first.trajectory) == trajectory_text(again.trajectory) &&
                           nlohmann::json(a) == nlohmann::json(b);
    const auto log1 = sim::run_closed_loop(first.trajectory, s.robot, s.controller, s.detector, s.sim, s.ground);
    const auto log2 = sim::run_closed_loop(again.trajectory, s.robot, s.controller, s.detector, s.sim, s.ground);
    const bool same_log = log1 == log2;
    pass = pass && same_plan && same_log;
    detail += name + (same_plan && same_log ? " identical; " : " differs; ");
  }
  if (env.drops.empty()) env.drops = run_drops(env);
  const auto again = run_drops(env);
  int same = 0;
  for (std::size_t i = 0; i < again.size(); ++i) same += again[i] == env.drops[i] ? 1 : 0;
  pass = pass && same == 100;
  detail += std::to_string(same) + "/100 drop logs identical";
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  Env env;
  env.scenario_dir = LLJUMP_SCENARIO_DIR;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--scenarios" && i + 1 < argc) {
      env.scenario_dir = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--scenarios DIR]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome(Env&)>>> criteria = {
      {"conservation", conservation},
      {"single-body equivalence", srbm_equivalence},
      {"inertia shaping", inertia_shaping},
      {"planner convergence", planner_convergence},
      {"model comparison", model_comparison},
      {"QP oracle", qp_oracle_check},
      {"static stance", static_stance},
      {"contact detection", contact_detection},
      {"mode-switch timing", mode_timing},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << std::setw(2) << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
              << ": " << o.detail << " [" << fix(secs, 1) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
