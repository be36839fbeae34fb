#include "lljump/solver/qp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "lljump/errors.hpp"

namespace lljump::solver {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowKind { Equality, Inequality, Bound };

// All constraints stacked as l <= A z <= u.
struct Stacked {
  MatrixXd A;
  VectorXd l;
  VectorXd u;
  std::vector<RowKind> kind;
  std::vector<int> source;  // row index within its own group (variable index for bounds)
  int n_eq{0};
  int n_in{0};
};

Stacked stack(const QpProblem& qp) {
  const int n = qp.n();
  std::vector<int> bounded;
  for (int i = 0; i < qp.lower.size(); ++i) {
    const bool lo = std::isfinite(qp.lower[i]);
    const bool hi = qp.upper.size() && std::isfinite(qp.upper[i]);
    if (lo || hi) bounded.push_back(i);
  }
  if (qp.lower.size() == 0) {
    for (int i = 0; i < qp.upper.size(); ++i)
      if (std::isfinite(qp.upper[i])) bounded.push_back(i);
  }
  Stacked s;
  s.n_eq = static_cast<int>(qp.A_eq.rows());
  s.n_in = static_cast<int>(qp.A_in.rows());
  const int m = s.n_eq + s.n_in + static_cast<int>(bounded.size());
  s.A = MatrixXd::Zero(m, n);
  s.l.resize(m);
  s.u.resize(m);
  int r = 0;
  for (int i = 0; i < s.n_eq; ++i, ++r) {
    s.A.row(r) = qp.A_eq.row(i);
    s.l[r] = s.u[r] = qp.b_eq[i];
    s.kind.push_back(RowKind::Equality);
    s.source.push_back(i);
  }
  for (int i = 0; i < s.n_in; ++i, ++r) {
    s.A.row(r) = qp.A_in.row(i);
    s.l[r] = -kInf;
    s.u[r] = qp.b_in[i];
    s.kind.push_back(RowKind::Inequality);
    s.source.push_back(i);
  }
  for (int i : bounded) {
    s.A(r, i) = 1.0;
    s.l[r] = qp.lower.size() ? qp.lower[i] : -kInf;
    s.u[r] = qp.upper.size() ? qp.upper[i] : kInf;
    s.kind.push_back(RowKind::Bound);
    s.source.push_back(i);
    ++r;
  }
  return s;
}

bool is_fixed_row(const Stacked& s, int i) { return s.l[i] == s.u[i]; }

double primal_violation(const Stacked& s, const VectorXd& x) {
  if (s.A.rows() == 0) return 0.0;
  const VectorXd Ax = s.A * x;
  double v = 0.0;
  for (Eigen::Index i = 0; i < Ax.size(); ++i) {
    v = std::max(v, Ax[i] - s.u[i]);
    v = std::max(v, s.l[i] - Ax[i]);
  }
  return v;
}

double dual_residual_rel(const QpProblem& qp, const Stacked& s, const VectorXd& x, const VectorXd& y) {
  const VectorXd Gx = qp.G * x;
  const VectorXd Aty = s.A.transpose() * y;
  const double scale = std::max({1.0, qp.g.lpNorm<Eigen::Infinity>(), Gx.lpNorm<Eigen::Infinity>(),
                                 Aty.size() ? Aty.lpNorm<Eigen::Infinity>() : 0.0});
  return (Gx + qp.g + Aty).lpNorm<Eigen::Infinity>() / scale;
}

enum class Active : signed char { None = 0, Lower = -1, Upper = 1 };

// Solves the equality-constrained QP on the active rows.
bool solve_active(const QpProblem& qp, const Stacked& s, const std::vector<Active>& act, VectorXd& x,
                  VectorXd& y) {
  const int n = qp.n();
  std::vector<int> rows;
  for (int i = 0; i < static_cast<int>(act.size()); ++i)
    if (act[i] != Active::None) rows.push_back(i);
  const int k = static_cast<int>(rows.size());
  MatrixXd K = MatrixXd::Zero(n + k, n + k);
  VectorXd rhs(n + k);
  K.topLeftCorner(n, n) = qp.G;
  rhs.head(n) = -qp.g;
  for (int j = 0; j < k; ++j) {
    const int i = rows[j];
    K.block(n + j, 0, 1, n) = s.A.row(i);
    K.block(0, n + j, n, 1) = s.A.row(i).transpose();
    rhs[n + j] = act[i] == Active::Lower ? s.l[i] : s.u[i];
  }
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(K);
  VectorXd sol = cod.solve(rhs);
  // One step of iterative refinement.
  sol += cod.solve(rhs - K * sol);
  if (!sol.allFinite()) return false;
  x = sol.head(n);
  y = VectorXd::Zero(s.A.rows());
  for (int j = 0; j < k; ++j) y[rows[j]] = sol[n + j];
  return (K * sol - rhs).lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
}

// Active-set refinement seeded from the ADMM iterate.
bool polish(const QpProblem& qp, const Stacked& s, const VectorXd& z_admm, const VectorXd& y_admm,
            double tol, VectorXd& x_out, VectorXd& y_out) {
  const int m = static_cast<int>(s.A.rows());
  std::vector<Active> act(m, Active::None);
  for (int i = 0; i < m; ++i) {
    if (is_fixed_row(s, i)) {
      act[i] = Active::Upper;
    } else if (std::isfinite(s.l[i]) && z_admm[i] - s.l[i] < -y_admm[i]) {
      act[i] = Active::Lower;
    } else if (std::isfinite(s.u[i]) && s.u[i] - z_admm[i] < y_admm[i]) {
      act[i] = Active::Upper;
    }
  }
  const int max_rounds = 3 * (m + qp.n()) + 10;
  VectorXd x, y;
  for (int round = 0; round < max_rounds; ++round) {
    if (!solve_active(qp, s, act, x, y)) {
      // Dependent active rows: drop the last non-fixed active row and retry.
      bool dropped = false;
      for (int i = m - 1; i >= 0 && !dropped; --i) {
        if (act[i] != Active::None && !is_fixed_row(s, i)) {
          act[i] = Active::None;
          dropped = true;
        }
      }
      if (!dropped) return false;
      continue;
    }
    // Wrong-signed multipliers leave the active set first.
    int worst = -1;
    double worst_val = tol;
    for (int i = 0; i < m; ++i) {
      if (act[i] == Active::None || is_fixed_row(s, i)) continue;
      const double wrong = act[i] == Active::Lower ? y[i] : -y[i];
      if (wrong > worst_val) {
        worst_val = wrong;
        worst = i;
      }
    }
    if (worst >= 0) {
      act[worst] = Active::None;
      continue;
    }
    const VectorXd Ax = s.A * x;
    worst = -1;
    worst_val = tol;
    Active side = Active::None;
    for (int i = 0; i < m; ++i) {
      if (act[i] != Active::None) continue;
      if (Ax[i] - s.u[i] > worst_val) {
        worst_val = Ax[i] - s.u[i];
        worst = i;
        side = Active::Upper;
      }
      if (s.l[i] - Ax[i] > worst_val) {
        worst_val = s.l[i] - Ax[i];
        worst = i;
        side = Active::Lower;
      }
    }
    if (worst >= 0) {
      act[worst] = side;
      continue;
    }
    x_out = x;
    y_out = y;
    return true;
  }
  return false;
}

bool psd_check(const MatrixXd& G) {
  for (double jitter : {0.0, 1e-14, 1e-12, 1e-10}) {
    Eigen::LLT<MatrixXd> llt(G + jitter * MatrixXd::Identity(G.rows(), G.cols()));
    if (llt.info() == Eigen::Success) return true;
  }
  return false;
}

}  // namespace

double QpProblem::violation(const Eigen::VectorXd& z) const { return primal_violation(stack(*this), z); }

void QpProblem::validate() const {
  const int n = this->n();
  if (G.rows() != n || G.cols() != n) throw LengthMismatch("G must be n x n");
  if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n)) {
    throw LengthMismatch("A_eq/b_eq dimensions inconsistent");
  }
  if (A_in.rows() != b_in.size() || (A_in.rows() > 0 && A_in.cols() != n)) {
    throw LengthMismatch("A_in/b_in dimensions inconsistent");
  }
  if ((lower.size() != 0 && lower.size() != n) || (upper.size() != 0 && upper.size() != n)) {
    throw LengthMismatch("bounds must be empty or length n");
  }
  if (!G.isApprox(G.transpose(), 1e-12)) throw InvalidModel("G must be symmetric");
}

QpResult solve_qp(const QpProblem& qp, const std::optional<Eigen::VectorXd>& warm_start,
                  const QpSettings& st) {
  const auto t0 = std::chrono::steady_clock::now();
  qp.validate();
  const int n = qp.n();
  const Stacked s = stack(qp);
  const int m = static_cast<int>(s.A.rows());

  QpResult res;
  auto finish = [&](SolveStatus status, const VectorXd& x, const VectorXd& y, int iters) {
    res.z = x;
    res.y_eq = y.head(s.n_eq);
    res.y_in = y.segment(s.n_eq, s.n_in);
    res.y_bound = VectorXd::Zero(n);
    for (int i = s.n_eq + s.n_in; i < m; ++i) res.y_bound[s.source[i]] = y[i];
    res.report.status = status;
    res.report.iterations = iters;
    res.report.constraint_violation = primal_violation(s, x);
    res.report.kkt_residual = dual_residual_rel(qp, s, x, y);
    res.report.objective = qp.objective(x);
    res.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };

  if (!psd_check(qp.G)) return finish(SolveStatus::NumericalFailure, VectorXd::Zero(n), VectorXd::Zero(m), 0);

  VectorXd x = warm_start && warm_start->size() == n ? *warm_start : VectorXd::Zero(n);
  VectorXd z = m ? VectorXd((s.A * x).cwiseMax(s.l).cwiseMin(s.u)) : VectorXd();
  VectorXd y = VectorXd::Zero(m);

  double rho = st.rho;
  auto rho_vector = [&](double base) {
    VectorXd r(m);
    for (int i = 0; i < m; ++i) {
      if (is_fixed_row(s, i)) r[i] = 1e3 * base;
      else if (!std::isfinite(s.l[i]) && !std::isfinite(s.u[i])) r[i] = st.rho_min;
      else r[i] = base;
    }
    return r;
  };
  VectorXd rho_v = rho_vector(rho);
  auto factor = [&]() {
    MatrixXd K = qp.G + st.sigma * MatrixXd::Identity(n, n);
    if (m) K += s.A.transpose() * rho_v.asDiagonal() * s.A;
    return Eigen::LLT<MatrixXd>(K);
  };
  Eigen::LLT<MatrixXd> llt = factor();

  int iter = 0;
  bool admm_converged = false;
  bool infeasible = false;
  for (iter = 1; iter <= st.max_iter; ++iter) {
    const VectorXd rhs = st.sigma * x - qp.g + (m ? VectorXd(s.A.transpose() * (rho_v.cwiseProduct(z) - y)) : VectorXd::Zero(n));
    const VectorXd x_tilde = llt.solve(rhs);
    const VectorXd z_tilde = s.A * x_tilde;
    x = st.alpha * x_tilde + (1.0 - st.alpha) * x;
    if (m) {
      const VectorXd z_hat = st.alpha * z_tilde + (1.0 - st.alpha) * z;
      const VectorXd z_new = (z_hat + y.cwiseQuotient(rho_v)).cwiseMax(s.l).cwiseMin(s.u);
      const VectorXd dy = rho_v.cwiseProduct(z_hat - z_new);
      y += dy;
      z = z_new;

      // Primal infeasibility certificate from the dual increment.
      const double dy_norm = dy.lpNorm<Eigen::Infinity>();
      if (iter > 50 && dy_norm > 1e-12) {
        const double eps = 1e-6 * dy_norm;
        bool certificate = (s.A.transpose() * dy).lpNorm<Eigen::Infinity>() <= eps;
        double support = 0.0;
        for (int i = 0; i < m && certificate; ++i) {
          if (dy[i] > eps) {
            if (!std::isfinite(s.u[i])) certificate = false;
            else support += s.u[i] * dy[i];
          } else if (dy[i] < -eps) {
            if (!std::isfinite(s.l[i])) certificate = false;
            else support += s.l[i] * dy[i];
          }
        }
        if (certificate && support < -eps) {
          infeasible = true;
          break;
        }
      }
    }

    const VectorXd Ax = m ? VectorXd(s.A * x) : VectorXd();
    const double r_prim = m ? (Ax - z).lpNorm<Eigen::Infinity>() : 0.0;
    const VectorXd Gx = qp.G * x;
    const VectorXd Aty = m ? VectorXd(s.A.transpose() * y) : VectorXd::Zero(n);
    const double r_dual = (Gx + qp.g + Aty).lpNorm<Eigen::Infinity>();
    const double prim_scale = m ? std::max(Ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>()) : 0.0;
    const double dual_scale = std::max({Gx.lpNorm<Eigen::Infinity>(), Aty.lpNorm<Eigen::Infinity>(),
                                        qp.g.lpNorm<Eigen::Infinity>()});
    if (r_prim <= st.eps_abs + st.eps_rel * prim_scale && r_dual <= st.eps_abs + st.eps_rel * dual_scale) {
      admm_converged = true;
      break;
    }
    if (m && iter % st.adapt_interval == 0) {
      const double num = r_prim / std::max(prim_scale, 1e-30);
      const double den = r_dual / std::max(dual_scale, 1e-30);
      if (den > 0.0 && num > 0.0) {
        const double rho_new = std::clamp(rho * std::sqrt(num / den), st.rho_min, st.rho_max);
        if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
          rho = rho_new;
          rho_v = rho_vector(rho);
          llt = factor();
        }
      }
    }
  }
  iter = std::min(iter, st.max_iter);

  if (st.polish && !infeasible) {
    VectorXd xp, yp;
    const VectorXd z_seed = m ? z : VectorXd();
    if (polish(qp, s, z_seed, y, 1e-12 * std::max(1.0, qp.g.lpNorm<Eigen::Infinity>()), xp, yp)) {
      // Snap bound-active variables exactly onto their bounds.
      for (int i = s.n_eq + s.n_in; i < m; ++i) {
        const int v = s.source[i];
        if (yp[i] < 0.0) xp[v] = s.l[i];
        else if (yp[i] > 0.0) xp[v] = s.u[i];
        xp[v] = std::clamp(xp[v], s.l[i], s.u[i]);
      }
      if (primal_violation(s, xp) <= st.accept_tol && dual_residual_rel(qp, s, xp, yp) <= st.accept_tol) {
        res.polished = true;
        return finish(SolveStatus::Converged, xp, yp, iter);
      }
    }
  }
  if (infeasible) return finish(SolveStatus::Infeasible, x, y, iter);
  const bool ok = admm_converged && primal_violation(s, x) <= st.accept_tol &&
                  dual_residual_rel(qp, s, x, y) <= st.accept_tol;
  return finish(ok ? SolveStatus::Converged : SolveStatus::MaxIters, x, y, iter);
}

}  // namespace lljump::solver
