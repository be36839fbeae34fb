#include "lljump/controller.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <limits>

namespace lljump::controller {

namespace {

void check_gain(const Mat3& K, const char* name) {
  const Mat3 off = K - Mat3(K.diagonal().asDiagonal());
  if (!off.isZero(0.0) || K.diagonal().minCoeff() < 0.0) {
    throw InvalidModel(std::string(name) + " must be diagonal with nonnegative entries");
  }
}

void check_psd(const Mat3& W, const char* name) {
  if (!W.isApprox(W.transpose(), 1e-12) && !W.isZero(0.0)) throw InvalidModel(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(W, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, W.norm())) {
    throw InvalidModel(std::string(name) + " must be positive semidefinite");
  }
}

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return S;
}

}  // namespace

void TaskGains::validate() const {
  check_gain(K_P_pos, "K_P_pos");
  check_gain(K_D_pos, "K_D_pos");
  check_gain(K_P_ang, "K_P_ang");
  check_gain(K_D_ang, "K_D_ang");
}

void ControllerWeights::validate() const {
  check_psd(W_lin, "W_lin");
  check_psd(W_ang, "W_ang");
  check_psd(W_2, "W_2");
  if (!(w_reg > 0.0)) throw InvalidModel("w_reg must be positive");
}

const char* to_string(Mode m) { return m == Mode::ForceTracking ? "force_tracking" : "trajectory_tracking"; }

Vec3 linear_command(const Vec3& x_des, const Vec3& xd_des, const Vec3& xdd_des, const Vec3& x, const Vec3& xd,
                    const TaskGains& gains) {
  return xdd_des + gains.K_P_pos * (x_des - x) + gains.K_D_pos * (xd_des - xd);
}

Vec3 angular_command(const Mat3& R_des, const Mat3& R, const Vec3& w_des, const Vec3& w, const Vec3& wd_des,
                     const TaskGains& gains) {
  const Eigen::AngleAxisd aa(R_des * R.transpose());
  return wd_des + gains.K_P_ang * (aa.axis() * aa.angle()) + gains.K_D_ang * (w_des - w);
}

Vec3 clip_to_pyramid(const Vec3& f, double mu, double f_max_z) {
  const double fz = std::clamp(f.z(), 0.0, f_max_z);
  const double t = mu * fz;
  return {std::clamp(f.x(), -t, t), std::clamp(f.y(), -t, t), fz};
}

ForceQpResult solve_force_qp(const model::State& x, const Commands& cmd, const std::vector<Vec3>& points,
                             const std::vector<Vec3>& f_des, const ControllerWeights& weights,
                             const model::RobotModel& model, const std::optional<Eigen::VectorXd>& warm_start) {
  const int n = static_cast<int>(points.size());
  if (n == 0) throw NoActiveContacts("force QP needs at least one active contact");
  if (!f_des.empty() && f_des.size() != points.size()) throw LengthMismatch("f_des must match the contact points");
  const int nv = 3 * n;
  const double m = model.total_mass();

  Eigen::MatrixXd A_lin(3, nv), A_ang(3, nv);
  for (int i = 0; i < n; ++i) {
    A_lin.block<3, 3>(0, 3 * i) = Mat3::Identity();
    A_ang.block<3, 3>(0, 3 * i) = skew(points[i] - x.r);
  }
  const Vec3 b_lin = m * (cmd.com_acc - model.gravity.g);
  const Vec3& b_ang = cmd.L_dot;

  solver::QpProblem qp;
  qp.G = 2.0 * (A_lin.transpose() * weights.W_lin * A_lin + A_ang.transpose() * weights.W_ang * A_ang);
  qp.g = -2.0 * (A_lin.transpose() * weights.W_lin * b_lin + A_ang.transpose() * weights.W_ang * b_ang);
  for (int i = 0; i < n; ++i) {
    qp.G.block<3, 3>(3 * i, 3 * i) += 2.0 * (weights.W_2 + weights.w_reg * Mat3::Identity());
    if (!f_des.empty()) qp.g.segment<3>(3 * i) -= 2.0 * weights.W_2 * f_des[i];
  }
  qp.A_eq.resize(0, nv);
  qp.b_eq.resize(0);
  qp.A_in = Eigen::MatrixXd::Zero(4 * n, nv);
  qp.b_in = Eigen::VectorXd::Zero(4 * n);
  Eigen::Matrix<double, 4, 3> P;
  P << 1, 0, -model.mu, -1, 0, -model.mu, 0, 1, -model.mu, 0, -1, -model.mu;
  const double inf = std::numeric_limits<double>::infinity();
  qp.lower = Eigen::VectorXd::Constant(nv, -inf);
  qp.upper = Eigen::VectorXd::Constant(nv, inf);
  for (int i = 0; i < n; ++i) {
    qp.A_in.block<4, 3>(4 * i, 3 * i) = P;
    qp.lower[3 * i + 2] = 0.0;
    qp.upper[3 * i + 2] = model.f_max_z;
  }

  std::optional<Eigen::VectorXd> warm;
  if (warm_start && warm_start->size() == nv) warm = warm_start;
  solver::QpResult qr = solver::solve_qp(qp, warm);
  if (!qr.report.converged()) {
    throw QpInfeasible("force QP ended with status " + solver::to_string(qr.report.status));
  }

  ForceQpResult out;
  out.report = qr.report;
  out.z = qr.z;
  out.forces.reserve(n);
  // Snap away ADMM-level residue so the feasibility contract holds exactly.
  for (int i = 0; i < n; ++i) out.forces.push_back(clip_to_pyramid(qr.z.segment<3>(3 * i), model.mu, model.f_max_z));
  return out;
}

ControllerMode update_mode(const ControllerMode& m, bool contact_event, double now) {
  ControllerMode next = m;
  if (m.mode == Mode::ForceTracking) {
    if (m.timer(now) >= m.force_phase_duration - 1e-9) next.mode = Mode::TrajectoryTracking;
    return next;
  }
  if (contact_event) {
    next.mode = Mode::ForceTracking;
    next.entered_at = now;
  }
  return next;
}

}  // namespace lljump::controller
