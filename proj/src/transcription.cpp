#include "lljump/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

namespace lljump::transcription {

using solver::CostBlock;
using solver::CostKind;
using solver::Matrix;
using solver::ResidualBlock;
using solver::Vector;
using Packed = Eigen::Matrix<double, 13, 1>;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_kinematic(const Vec3& r, const Vec3& p, const RobotModel& model, const char* what) {
  const double d = (r - p).norm();
  if (d < model.l_min - 1e-9 || d > model.l_max + 1e-9) {
    throw InfeasibleBounds(std::string(what) + " foot is " + std::to_string(d) + " m from the CoM, outside [" +
                           std::to_string(model.l_min) + ", " + std::to_string(model.l_max) + "]");
  }
}

std::vector<bool> present_points(const Phase& ph, const RobotModel& model, bool all) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < model.leg_count(); ++i)
    for (std::size_t c = 0; c < model.points_per_foot(); ++c) out.push_back(all || ph.contact[i]);
  return out;
}

void append(std::vector<int>& v, int first, int count) {
  for (int i = 0; i < count; ++i) v.push_back(first + i);
}

// Flat variable indices of knot k's force block, feet block.
std::vector<int> force_vars(const KnotIndex& ki) {
  std::vector<int> v;
  if (ki.force >= 0) append(v, ki.force, 3 * ki.force_count);
  return v;
}

Control unpack_control(const Vector& local, int off_forces, const KnotIndex& ki, int off_feet, std::size_t legs) {
  Control u;
  u.forces.assign(ki.point_slot.size(), Vec3::Zero());
  for (std::size_t j = 0; j < ki.point_slot.size(); ++j) {
    if (ki.point_slot[j] >= 0) u.forces[j] = local.segment<3>(off_forces + 3 * ki.point_slot[j]);
  }
  u.feet.resize(legs);
  for (std::size_t i = 0; i < legs; ++i) u.feet[i] = local.segment<3>(off_feet + 3 * static_cast<int>(i));
  return u;
}

// Central differences over the first `fd_cols` local variables only.
void partial_fd(const std::function<void(const Vector&, Eigen::Ref<Vector>)>& eval, int rows, const Vector& local,
                Eigen::Ref<Matrix> J, int fd_cols) {
  Vector xp = local;
  Vector rp(rows), rm(rows);
  for (int j = 0; j < fd_cols; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(local[j]));
    xp[j] = local[j] + h;
    eval(xp, rp);
    xp[j] = local[j] - h;
    eval(xp, rm);
    xp[j] = local[j];
    J.col(j) = (rp - rm) / (2.0 * h);
  }
}

Vec4 terminal_quat_rate(const Quaternion& q_raw, const Vec3& com, const Vec3& L, const std::vector<Vec3>& feet,
                        const RobotModel& model) {
  const Quaternion q = q_raw.normalized();
  const model::Mat3 I = model::centroidal_inertia_body(q, com, feet, model);
  const Vec3 w = I.ldlt().solve(model::quat_to_rot(q).transpose() * L);
  return model::quat_rate(q, w);
}

}  // namespace

void JumpTask::validate(const RobotModel& model) const {
  if (feet_ini.size() != model.leg_count() || feet_fin.size() != model.leg_count()) {
    throw LengthMismatch("task foot lists must have one entry per leg");
  }
  if (!(t_min > 0.0)) throw InfeasibleBounds("t_min must be positive");
  if (t_min > t_max) throw InfeasibleBounds("t_min exceeds t_max");
  if (N < 3) throw InconsistentSchedule("need at least three segments");
  for (const State* x : {&x_ini, &x_fin}) {
    if (std::abs(x->q.norm() - 1.0) > model::kUnitTolerance) throw NonUnitQuaternion("task orientation is not unit");
  }
  for (std::size_t i = 0; i < feet_ini.size(); ++i) {
    require_kinematic(x_ini.r, feet_ini[i], model, "initial");
    require_kinematic(x_fin.r, feet_fin[i], model, "final");
  }
}

int PhaseSchedule::total_segments() const {
  return std::accumulate(phases.begin(), phases.end(), 0, [](int a, const Phase& p) { return a + p.segments; });
}

int PhaseSchedule::phase_of_segment(int k) const {
  int end = 0;
  for (std::size_t p = 0; p < phases.size(); ++p) {
    end += phases[p].segments;
    if (k < end) return static_cast<int>(p);
  }
  throw LengthMismatch("segment index " + std::to_string(k) + " beyond the schedule");
}

int PhaseSchedule::phase_of_knot(int k) const { return phase_of_segment(std::min(k, total_segments() - 1)); }

void PhaseSchedule::validate(std::size_t leg_count) const {
  if (phases.empty()) throw InconsistentSchedule("schedule has no phases");
  for (const auto& ph : phases) {
    if (ph.segments < 1) throw InconsistentSchedule("every phase needs at least one segment");
    if (ph.contact.size() != leg_count || ph.foot_targets.size() != leg_count) {
      throw InconsistentSchedule("contact flags and foot targets need one entry per leg");
    }
    const bool any = std::any_of(ph.contact.begin(), ph.contact.end(), [](bool c) { return c; });
    if (ph.kind == PhaseKind::Flight && any) throw InconsistentSchedule("flight phase has a foot in contact");
    for (std::size_t i = 0; i < leg_count; ++i) {
      if (ph.contact[i] != ph.foot_targets[i].has_value()) {
        throw InconsistentSchedule("foot " + std::to_string(i) + ": contact flag and pinned target disagree in " +
                                   to_string(ph.kind) + " phase");
      }
    }
  }
}

PhaseSchedule PhaseSchedule::jump(const JumpTask& task, std::optional<std::array<int, 3>> segments) {
  std::array<int, 3> seg{};
  if (segments) {
    seg = *segments;
    if (seg[0] + seg[1] + seg[2] != task.N) throw InconsistentSchedule("phase segments must sum to N");
  } else {
    if (task.N % 3 != 0) throw InconsistentSchedule("N must be divisible by the phase count (3)");
    seg.fill(task.N / 3);
  }
  const std::size_t L = task.feet_ini.size();
  PhaseSchedule s;
  Phase takeoff{PhaseKind::Takeoff, seg[0], std::vector<bool>(L, true), {}};
  Phase flight{PhaseKind::Flight, seg[1], std::vector<bool>(L, false), std::vector<std::optional<Vec3>>(L)};
  Phase landing{PhaseKind::PostLanding, seg[2], std::vector<bool>(L, true), {}};
  for (std::size_t i = 0; i < L; ++i) {
    takeoff.foot_targets.emplace_back(task.feet_ini[i]);
    landing.foot_targets.emplace_back(task.feet_fin[i]);
  }
  s.phases = {takeoff, flight, landing};
  return s;
}

void CostWeights::validate() const {
  for (double w : {w_smooth_force, w_smooth_foot, w_H, w_L, w_time, w_qfin, w_qdotfin}) {
    if (!(w >= 0.0)) throw InvalidModel("cost weights must be nonnegative");
  }
}

Eigen::Matrix<double, 4, 3> friction_pyramid_matrix(double mu) {
  if (!(mu > 0.0)) throw InvalidModel("friction coefficient must be positive");
  Eigen::Matrix<double, 4, 3> P;
  P << 1, 0, -mu,
      -1, 0, -mu,
       0, 1, -mu,
       0, -1, -mu;
  return P;
}

Eigen::VectorXd grf_limit_from_torques(const std::optional<Eigen::MatrixXd>& jacobian,
                                       const std::optional<Eigen::VectorXd>& tau_max) {
  if (!jacobian || !tau_max) throw MissingJacobian("force limit needs both a default-pose Jacobian and tau_max");
  if (jacobian->rows() != tau_max->size()) throw LengthMismatch("Jacobian rows must match tau_max length");
  return jacobian->transpose() * *tau_max;
}

double resolve_f_max_z(const std::optional<double>& explicit_f_max_z, const RobotModel& model) {
  if (explicit_f_max_z) return *explicit_f_max_z;
  const Eigen::VectorXd f = grf_limit_from_torques(model.default_jacobian, model.tau_max);
  if (f.size() < 3) throw LengthMismatch("force limit vector needs a z-component");
  return std::abs(f[2]);
}

ProblemCounts expected_counts(const JumpTask& task, const PhaseSchedule& schedule, const RobotModel& model,
                              const TranscriptionOptions& options) {
  const int N = task.N;
  const int L = static_cast<int>(model.leg_count());
  const int ppf = static_cast<int>(model.points_per_foot());
  ProblemCounts c;
  int present = 0;  // contact points carrying force variables, summed over knots
  int pinned_zero = 0;
  for (int k = 0; k <= N; ++k) {
    const Phase& ph = schedule.phases[schedule.phase_of_knot(k)];
    const int stance = static_cast<int>(std::count(ph.contact.begin(), ph.contact.end(), true));
    present += stance * ppf;
    if (!options.eliminate_flight_forces) pinned_zero += (L - stance) * ppf;
  }
  c.n_vars = (N + 1) * (13 + 3 * L) + 3 * (present + pinned_zero) + static_cast<int>(schedule.phases.size());
  c.equalities = 13 * N + (N + 1) + 3 * pinned_zero;
  c.inequalities = 2 * L * (N + 1) + 4 * present;
  return c;
}

TranscribedProblem build_nlp(const JumpTask& task, const PhaseSchedule& schedule, const CostWeights& weights,
                             const RobotModel& model, const TranscriptionOptions& options) {
  model.validate();
  weights.validate();
  task.validate(model);
  schedule.validate(model.leg_count());
  if (schedule.total_segments() != task.N) throw InconsistentSchedule("schedule segments do not sum to N");
  if (!(options.swing_clearance >= 0.0)) throw InvalidModel("swing clearance must be nonnegative");

  TranscribedProblem tp;
  tp.task = task;
  tp.schedule = schedule;
  tp.model = model;
  tp.weights = weights;
  tp.options = options;

  const int N = task.N;
  const std::size_t legs = model.leg_count();
  const std::size_t points = model.force_count();
  const double m = model.total_mass();
  const double mg = m * model.gravity.g.norm();
  tp.momentum_scale = m;
  tp.angular_scale = model::centroidal_inertia(task.x_ini.q, task.x_ini.r, task.feet_ini, model).diagonal().maxCoeff();

  // Layout.
  Layout& lay = tp.layout;
  lay.N = N;
  lay.legs = legs;
  lay.points_per_foot = model.points_per_foot();
  int next = 0;
  for (int k = 0; k <= N; ++k) {
    const Phase& ph = schedule.phases[schedule.phase_of_knot(k)];
    KnotIndex ki;
    ki.state = next;
    next += 13;
    const auto pres = present_points(ph, model, !options.eliminate_flight_forces);
    ki.point_slot.assign(points, -1);
    for (std::size_t j = 0; j < points; ++j)
      if (pres[j]) ki.point_slot[j] = ki.force_count++;
    if (ki.force_count > 0) ki.force = next;
    next += 3 * ki.force_count;
    ki.feet = next;
    next += 3 * static_cast<int>(legs);
    lay.knots.push_back(std::move(ki));
  }
  for (std::size_t p = 0; p < schedule.phases.size(); ++p) lay.dt.push_back(next++);
  lay.n_vars = next;

  solver::NlpProblem& nlp = tp.nlp;
  nlp.n_vars = lay.n_vars;
  nlp.lower = Vector::Constant(nlp.n_vars, -kInf);
  nlp.upper = Vector::Constant(nlp.n_vars, kInf);
  nlp.scale = Vector::Ones(nlp.n_vars);

  // Bounds and scales.
  auto fix = [&](int idx, double v) { nlp.lower[idx] = nlp.upper[idx] = v; };
  double ground = kInf;
  for (const auto& ph : schedule.phases)
    for (const auto& t : ph.foot_targets)
      if (t) ground = std::min(ground, t->z());
  if (options.swing_floor) ground = *options.swing_floor;
  const double force_scale = mg / std::max<std::size_t>(1, points);
  for (int k = 0; k <= N; ++k) {
    const KnotIndex& ki = lay.knots[k];
    const Phase& ph = schedule.phases[schedule.phase_of_knot(k)];
    nlp.scale.segment(ki.state + 7, 3).setConstant(tp.momentum_scale);
    nlp.scale.segment(ki.state + 10, 3).setConstant(tp.angular_scale);
    for (std::size_t j = 0; j < points; ++j) {
      const int f = ki.force_var(j);
      if (f < 0) continue;
      nlp.scale.segment(f, 3).setConstant(force_scale);
      if (ph.contact[j / model.points_per_foot()]) {
        nlp.lower[f + 2] = 0.0;
        nlp.upper[f + 2] = model.f_max_z;
      }
    }
    for (std::size_t i = 0; i < legs; ++i) {
      const int p = ki.feet + 3 * static_cast<int>(i);
      if (ph.foot_targets[i]) {
        for (int a = 0; a < 3; ++a) fix(p + a, (*ph.foot_targets[i])[a]);
      } else if (std::isfinite(ground)) {
        nlp.lower[p + 2] = ground + options.swing_clearance;
      }
    }
  }
  const Packed x0 = task.x_ini.to_vector();
  const Packed xN = task.x_fin.to_vector();
  for (int a = 0; a < 13; ++a) fix(lay.knots[0].state + a, x0[a]);
  for (int a = 0; a < 13; ++a) {
    if (a >= 3 && a < 7 && options.orientation_in_cost) continue;
    fix(lay.knots[N].state + a, xN[a]);
  }
  for (int d : lay.dt) {
    nlp.lower[d] = task.t_min;
    nlp.upper[d] = task.t_max;
    nlp.scale[d] = task.t_max;
  }

  // Evaluators hold their own copy of the model so the problem can be moved.
  const auto mdl = std::make_shared<const RobotModel>(model);

  // Shooting defects.
  const double ms = tp.momentum_scale, as = tp.angular_scale;
  for (int k = 0; k < N; ++k) {
    const KnotIndex& ki = lay.knots[k];
    const int ph = schedule.phase_of_segment(k);
    ResidualBlock b;
    append(b.vars, ki.state, 13);
    const auto fv = force_vars(ki);
    b.vars.insert(b.vars.end(), fv.begin(), fv.end());
    const int off_feet = static_cast<int>(b.vars.size());
    append(b.vars, ki.feet, 3 * static_cast<int>(legs));
    const int off_dt = static_cast<int>(b.vars.size());
    b.vars.push_back(lay.dt[ph]);
    const int off_next = static_cast<int>(b.vars.size());
    append(b.vars, lay.knots[k + 1].state, 13);
    b.rows = 13;
    b.eval = [ki, off_feet, off_dt, off_next, legs, ms, as, mdl](const Vector& z, Eigen::Ref<Vector> r) {
      const Control u = unpack_control(z, 13, ki, off_feet, legs);
      const Packed pred = model::integrate_step_packed(z.head<13>(), u, z[off_dt], *mdl);
      r = z.segment<13>(off_next) - pred;
      r.segment<3>(7) /= ms;
      r.segment<3>(10) /= as;
    };
    b.jacobian = [eval = b.eval, off_next, ms, as](const Vector& z, Eigen::Ref<Matrix> J) {
      partial_fd(eval, 13, z, J, off_next);
      J.rightCols(13).setZero();
      for (int a = 0; a < 13; ++a) J(a, off_next + a) = a >= 10 ? 1.0 / as : (a >= 7 ? 1.0 / ms : 1.0);
    };
    nlp.equalities.push_back(std::move(b));
  }

  // Unit quaternions.
  for (int k = 0; k <= N; ++k) {
    ResidualBlock b;
    append(b.vars, lay.knots[k].state + 3, 4);
    b.rows = 1;
    b.eval = [](const Vector& z, Eigen::Ref<Vector> r) { r[0] = z.squaredNorm() - 1.0; };
    b.jacobian = [](const Vector& z, Eigen::Ref<Matrix> J) { J = 2.0 * z.transpose(); };
    nlp.equalities.push_back(std::move(b));
  }

  // Flight forces kept as variables are pinned to zero.
  for (int k = 0; k <= N; ++k) {
    const KnotIndex& ki = lay.knots[k];
    const Phase& ph = schedule.phases[schedule.phase_of_knot(k)];
    for (std::size_t j = 0; j < points; ++j) {
      const int f = ki.force_var(j);
      if (f < 0 || ph.contact[j / model.points_per_foot()]) continue;
      ResidualBlock b;
      append(b.vars, f, 3);
      b.rows = 3;
      b.eval = [mg](const Vector& z, Eigen::Ref<Vector> r) { r = z / mg; };
      b.jacobian = [mg](const Vector&, Eigen::Ref<Matrix> J) { J = Matrix::Identity(3, 3) / mg; };
      nlp.equalities.push_back(std::move(b));
    }
  }

  // Kinematic limits.
  const double lmin = model.l_min, lmax = model.l_max;
  for (int k = 0; k <= N; ++k) {
    for (std::size_t i = 0; i < legs; ++i) {
      ResidualBlock b;
      append(b.vars, lay.knots[k].state, 3);
      append(b.vars, lay.knots[k].feet + 3 * static_cast<int>(i), 3);
      b.rows = 2;
      b.eval = [lmin, lmax](const Vector& z, Eigen::Ref<Vector> r) {
        const double d = (z.head<3>() - z.tail<3>()).norm();
        r[0] = d - lmax;
        r[1] = lmin - d;
      };
      b.jacobian = [](const Vector& z, Eigen::Ref<Matrix> J) {
        const Vec3 v = z.head<3>() - z.tail<3>();
        const double d = std::max(v.norm(), 1e-12);
        const Eigen::RowVector3d u = v.transpose() / d;
        J.row(0) << u, -u;
        J.row(1) << -u, u;
      };
      nlp.inequalities.push_back(std::move(b));
    }
  }

  // Friction pyramid on stance forces.
  const Eigen::Matrix<double, 4, 3> P = friction_pyramid_matrix(model.mu);
  for (int k = 0; k <= N; ++k) {
    const KnotIndex& ki = lay.knots[k];
    const Phase& ph = schedule.phases[schedule.phase_of_knot(k)];
    for (std::size_t j = 0; j < points; ++j) {
      const int f = ki.force_var(j);
      if (f < 0 || !ph.contact[j / model.points_per_foot()]) continue;
      ResidualBlock b;
      append(b.vars, f, 3);
      b.rows = 4;
      b.eval = [P, mg](const Vector& z, Eigen::Ref<Vector> r) { r = P * z / mg; };
      b.jacobian = [P, mg](const Vector&, Eigen::Ref<Matrix> J) { J = P / mg; };
      nlp.inequalities.push_back(std::move(b));
    }
  }

  // Costs. Every term is a least-squares residual.
  const double sf = std::sqrt(weights.w_smooth_force), sp = std::sqrt(weights.w_smooth_foot);
  for (int k = 0; k < N; ++k) {
    const KnotIndex& a = lay.knots[k];
    const KnotIndex& c = lay.knots[k + 1];
    const int dt = lay.dt[schedule.phase_of_segment(k)];
    if (sp > 0.0) {
      for (std::size_t i = 0; i < legs; ++i) {
        ResidualBlock b;
        append(b.vars, a.feet + 3 * static_cast<int>(i), 3);
        append(b.vars, c.feet + 3 * static_cast<int>(i), 3);
        b.vars.push_back(dt);
        b.rows = 3;
        b.eval = [sp](const Vector& z, Eigen::Ref<Vector> r) { r = sp * (z.segment<3>(3) - z.head<3>()) / z[6]; };
        nlp.cost.push_back({std::move(b), CostKind::SumOfSquares});
      }
    }
    if (sf > 0.0) {
      for (std::size_t j = 0; j < points; ++j) {
        const int f0 = a.force_var(j), f1 = c.force_var(j);
        if (f0 < 0 && f1 < 0) continue;
        ResidualBlock b;
        if (f0 >= 0) append(b.vars, f0, 3);
        if (f1 >= 0) append(b.vars, f1, 3);
        b.vars.push_back(dt);
        b.rows = 3;
        const bool has0 = f0 >= 0, has1 = f1 >= 0;
        b.eval = [sf, has0, has1](const Vector& z, Eigen::Ref<Vector> r) {
          Vec3 v0 = Vec3::Zero(), v1 = Vec3::Zero();
          int o = 0;
          if (has0) v0 = z.segment<3>(o), o += 3;
          if (has1) v1 = z.segment<3>(o), o += 3;
          r = sf * (v1 - v0) / z[o];
        };
        nlp.cost.push_back({std::move(b), CostKind::SumOfSquares});
      }
    }
  }
  const double sH = std::sqrt(weights.w_H), sL = std::sqrt(weights.w_L);
  for (int k = 0; k <= N; ++k) {
    ResidualBlock b;
    append(b.vars, lay.knots[k].state + 7, 6);
    b.rows = 6;
    b.eval = [sH, sL](const Vector& z, Eigen::Ref<Vector> r) {
      r.head<3>() = sH * z.head<3>();
      r.tail<3>() = sL * z.tail<3>();
    };
    b.jacobian = [sH, sL](const Vector&, Eigen::Ref<Matrix> J) {
      J.setZero();
      J.diagonal().head<3>().setConstant(sH);
      J.diagonal().tail<3>().setConstant(sL);
    };
    nlp.cost.push_back({std::move(b), CostKind::SumOfSquares});
  }
  for (std::size_t p = 0; p < schedule.phases.size(); ++p) {
    const double c = std::sqrt(weights.w_time * schedule.phases[p].segments);
    ResidualBlock b;
    b.vars = {lay.dt[p]};
    b.rows = 1;
    b.eval = [c](const Vector& z, Eigen::Ref<Vector> r) { r[0] = c * z[0]; };
    b.jacobian = [c](const Vector&, Eigen::Ref<Matrix> J) { J(0, 0) = c; };
    nlp.cost.push_back({std::move(b), CostKind::SumOfSquares});
  }
  if (options.orientation_in_cost) {
    const KnotIndex& kn = lay.knots[N];
    const Vec4 q_fin = task.x_fin.q.coeffs();
    const Vec4 qdot_fin = terminal_quat_rate(task.x_fin.q, task.x_fin.r, task.x_fin.L, task.feet_fin, model);
    const double sq = std::sqrt(weights.w_qfin), sqd = std::sqrt(weights.w_qdotfin);
    ResidualBlock b;
    append(b.vars, kn.state, 13);
    append(b.vars, kn.feet, 3 * static_cast<int>(legs));
    b.rows = 8;
    b.eval = [=](const Vector& z, Eigen::Ref<Vector> r) {
      const Vec4 q = z.segment<4>(3);
      const bool flip = q.dot(q_fin) < 0.0;
      r.head<4>() = sq * (q - (flip ? Vec4(-q_fin) : q_fin));
      std::vector<Vec3> feet(legs);
      for (std::size_t i = 0; i < legs; ++i) feet[i] = z.segment<3>(13 + 3 * static_cast<int>(i));
      const Vec4 qd = terminal_quat_rate(Quaternion::from_coeffs(q), z.head<3>(), z.segment<3>(10), feet, *mdl);
      r.tail<4>() = sqd * (qd - (flip ? Vec4(-qdot_fin) : qdot_fin));
    };
    nlp.cost.push_back({std::move(b), CostKind::SumOfSquares});
  }

  nlp.validate();
  return tp;
}

Trajectory extract_trajectory(const Vector& z, const TranscribedProblem& tp) {
  const Layout& lay = tp.layout;
  if (z.size() != lay.n_vars) throw LengthMismatch("decision vector has the wrong length");
  Trajectory traj;
  traj.legs = lay.legs;
  traj.points_per_foot = lay.points_per_foot;
  double t = 0.0;
  for (int k = 0; k <= lay.N; ++k) {
    const KnotIndex& ki = lay.knots[k];
    const Phase& ph = tp.schedule.phases[tp.schedule.phase_of_knot(k)];
    traj.t.push_back(t);
    traj.states.push_back(State::from_vector(z.segment<13>(ki.state)));
    Control u;
    u.forces.assign(ki.point_slot.size(), Vec3::Zero());
    for (std::size_t j = 0; j < ki.point_slot.size(); ++j) {
      const int f = ki.force_var(j);
      if (f >= 0 && ph.contact[j / lay.points_per_foot]) u.forces[j] = z.segment<3>(f);
    }
    for (std::size_t i = 0; i < lay.legs; ++i) u.feet.push_back(z.segment<3>(ki.feet + 3 * static_cast<int>(i)));
    traj.controls.push_back(std::move(u));
    traj.phase.push_back(ph.kind);
    traj.contact.push_back(ph.contact);
    if (k < lay.N) {
      const double dt = z[lay.dt[tp.schedule.phase_of_segment(k)]];
      traj.dt.push_back(dt);
      t += dt;
    }
  }
  return traj;
}

Vector pack(const Trajectory& traj, const TranscribedProblem& tp) {
  const Layout& lay = tp.layout;
  if (static_cast<int>(traj.knot_count()) != lay.N + 1) throw LengthMismatch("trajectory knot count differs");
  Vector z = Vector::Zero(lay.n_vars);
  for (int k = 0; k <= lay.N; ++k) {
    const KnotIndex& ki = lay.knots[k];
    z.segment<13>(ki.state) = traj.states[k].to_vector();
    for (std::size_t j = 0; j < ki.point_slot.size(); ++j) {
      const int f = ki.force_var(j);
      if (f >= 0) z.segment<3>(f) = traj.controls[k].forces[j];
    }
    for (std::size_t i = 0; i < lay.legs; ++i) z.segment<3>(ki.feet + 3 * static_cast<int>(i)) = traj.controls[k].feet[i];
  }
  for (int k = 0; k < lay.N; ++k) z[lay.dt[tp.schedule.phase_of_segment(k)]] = traj.dt[k];
  return z;
}

Vector initial_guess(const TranscribedProblem& tp) {
  const JumpTask& task = tp.task;
  const Layout& lay = tp.layout;
  const RobotModel& model = tp.model;
  const int N = lay.N;
  const double dt = 0.5 * (task.t_min + task.t_max);
  Trajectory g;
  g.legs = lay.legs;
  g.points_per_foot = lay.points_per_foot;
  for (int k = 0; k <= N; ++k) {
    const double s = static_cast<double>(k) / N;
    const Phase& ph = tp.schedule.phases[tp.schedule.phase_of_knot(k)];
    State x;
    x.r = (1 - s) * task.x_ini.r + s * task.x_fin.r;
    x.q = model::slerp(task.x_ini.q, task.x_fin.q, s);
    x.H = (1 - s) * task.x_ini.H + s * task.x_fin.H;
    x.L = (1 - s) * task.x_ini.L + s * task.x_fin.L;
    Control u = Control::zero(model);
    const auto stance = static_cast<double>(std::count(ph.contact.begin(), ph.contact.end(), true));
    for (std::size_t j = 0; j < u.forces.size(); ++j) {
      if (ph.contact[j / lay.points_per_foot]) {
        u.forces[j] = -model.gravity.g * model.total_mass() / (stance * lay.points_per_foot);
      }
    }
    for (std::size_t i = 0; i < lay.legs; ++i) {
      if (ph.foot_targets[i]) {
        u.feet[i] = *ph.foot_targets[i];
      } else {
        const Vec3 off = (1 - s) * (task.feet_ini[i] - task.x_ini.r) + s * (task.feet_fin[i] - task.x_fin.r);
        u.feet[i] = x.r + off;
      }
    }
    g.t.push_back(k * dt);
    g.states.push_back(x);
    g.controls.push_back(u);
    g.phase.push_back(ph.kind);
    g.contact.push_back(ph.contact);
    if (k < N) g.dt.push_back(dt);
  }
  Vector z = pack(g, tp);
  return z.cwiseMax(tp.nlp.lower).cwiseMin(tp.nlp.upper);
}

double cost_smoothness(const Trajectory& traj, const CostWeights& w) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < traj.knot_count(); ++k) {
    const double dt = traj.dt[k];
    for (std::size_t i = 0; i < traj.legs; ++i) {
      total += w.w_smooth_foot * ((traj.controls[k + 1].feet[i] - traj.controls[k].feet[i]) / dt).squaredNorm();
    }
    for (std::size_t j = 0; j < traj.controls[k].forces.size(); ++j) {
      total += w.w_smooth_force * ((traj.controls[k + 1].forces[j] - traj.controls[k].forces[j]) / dt).squaredNorm();
    }
  }
  return total;
}

double cost_energy(const Trajectory& traj, const CostWeights& w) {
  double total = 0.0;
  for (const auto& x : traj.states) total += w.w_H * x.H.squaredNorm() + w.w_L * x.L.squaredNorm();
  return total;
}

double cost_time(const Trajectory& traj, const CostWeights& w) {
  double total = 0.0;
  for (double dt : traj.dt) total += dt * dt;
  return w.w_time * total;
}

double cost_final_orientation(const Trajectory& traj, const JumpTask& task, const CostWeights& w,
                              const RobotModel& model) {
  const State& x = traj.states.back();
  const Vec4 q = x.q.coeffs();
  const bool flip = q.dot(task.x_fin.q.coeffs()) < 0.0;
  const double sign = flip ? -1.0 : 1.0;
  const Vec4 dq = q - sign * task.x_fin.q.coeffs();
  const Vec4 qd = terminal_quat_rate(x.q, x.r, x.L, traj.controls.back().feet, model);
  const Vec4 qd_fin = terminal_quat_rate(task.x_fin.q, task.x_fin.r, task.x_fin.L, task.feet_fin, model);
  return w.w_qfin * dq.squaredNorm() + w.w_qdotfin * (qd - sign * qd_fin).squaredNorm();
}

PlanResult plan_jump(const JumpTask& task, const PhaseSchedule& schedule, const CostWeights& weights,
                     const RobotModel& model, const TranscriptionOptions& options,
                     const solver::NlpSolverConfig& cfg) {
  const TranscribedProblem tp = build_nlp(task, schedule, weights, model, options);
  const solver::NlpResult r = solver::solve_nlp(tp.nlp, initial_guess(tp), cfg);
  return {extract_trajectory(r.z, tp), r.report};
}

}  // namespace lljump::transcription
