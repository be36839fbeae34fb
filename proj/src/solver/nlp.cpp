#include "lljump/solver/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <iostream>
#include <limits>

#include <Eigen/Sparse>

#include "lljump/errors.hpp"

namespace lljump::solver {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> row_offsets(const std::vector<ResidualBlock>& blocks) {
  std::vector<int> off;
  off.reserve(blocks.size() + 1);
  int acc = 0;
  for (const auto& b : blocks) {
    off.push_back(acc);
    acc += b.rows;
  }
  off.push_back(acc);
  return off;
}

Vector eval_blocks(const std::vector<ResidualBlock>& blocks, const Vector& z) {
  const auto off = row_offsets(blocks);
  Vector out(off.back());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].eval(gather(z, blocks[i].vars), out.segment(off[i], blocks[i].rows));
  }
  return out;
}

double bound_violation(const NlpProblem& p, const Vector& z) {
  double v = 0.0;
  for (int i = 0; i < p.n_vars; ++i) {
    v = std::max(v, p.lower[i] - z[i]);
    v = std::max(v, z[i] - p.upper[i]);
  }
  return v;
}

// Augmented Lagrangian of the problem for fixed multipliers and penalty.
class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const NlpProblem& p, const DiffOptions& diff)
      : p_(p), diff_(diff), eq_off_(row_offsets(p.equalities)), in_off_(row_offsets(p.inequalities)) {}

  void set(const Vector& lam, const Vector& nu, double mu) {
    lam_ = &lam;
    nu_ = &nu;
    mu_ = mu;
  }

  double value(const Vector& z) const { return evaluate(z, nullptr); }
  double value_and_gradient(const Vector& z, Vector& grad) const { return evaluate(z, &grad); }

  /// Gauss-Newton model of the (least-squares) augmented Lagrangian at z:
  /// gradient and H = 2 J'J with a structural diagonal.
  double gauss_newton_system(const Vector& z, Vector& grad, Eigen::SparseMatrix<double>& H) const {
    grad.setZero(p_.n_vars);
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < p_.n_vars; ++i) trip.emplace_back(i, i, 0.0);
    double total = 0.0;
    Vector r;
    auto accumulate = [&](const ResidualBlock& b, const Vector& local, const Matrix& J, const Vector& w,
                          double h_weight) {
      const Vector g = J.transpose() * w;
      const Matrix JtJ = h_weight * (J.transpose() * J);
      const auto nv = b.vars.size();
      for (std::size_t a = 0; a < nv; ++a) {
        grad[b.vars[a]] += g[a];
        for (std::size_t c = 0; c < nv; ++c) {
          if (JtJ(a, c) != 0.0) trip.emplace_back(b.vars[a], b.vars[c], JtJ(a, c));
        }
      }
      (void)local;
    };
    for (const auto& cb : p_.cost) {
      const ResidualBlock& b = cb.block;
      const Vector local = gather(z, b.vars);
      r.resize(b.rows);
      b.eval(local, r);
      total += r.squaredNorm();
      accumulate(b, local, block_jacobian(b, local, diff_), 2.0 * r, 2.0);
    }
    for (std::size_t i = 0; i < p_.equalities.size(); ++i) {
      const ResidualBlock& b = p_.equalities[i];
      const Vector local = gather(z, b.vars);
      r.resize(b.rows);
      b.eval(local, r);
      const auto lam = lam_->segment(eq_off_[i], b.rows);
      total += lam.dot(r) + 0.5 * mu_ * r.squaredNorm();
      accumulate(b, local, block_jacobian(b, local, diff_), lam + mu_ * r, mu_);
    }
    for (std::size_t i = 0; i < p_.inequalities.size(); ++i) {
      const ResidualBlock& b = p_.inequalities[i];
      const Vector local = gather(z, b.vars);
      r.resize(b.rows);
      b.eval(local, r);
      const auto nu = nu_->segment(in_off_[i], b.rows);
      const Vector shifted = (nu + mu_ * r).cwiseMax(0.0);
      total += (shifted.squaredNorm() - nu.squaredNorm()) / (2.0 * mu_);
      if (!shifted.any()) continue;
      Matrix J = block_jacobian(b, local, diff_);
      for (int row = 0; row < b.rows; ++row)
        if (shifted[row] == 0.0) J.row(row).setZero();
      accumulate(b, local, J, shifted, mu_);
    }
    H.resize(p_.n_vars, p_.n_vars);
    H.setFromTriplets(trip.begin(), trip.end());
    return total;
  }

  bool least_squares() const {
    return std::all_of(p_.cost.begin(), p_.cost.end(), [](const CostBlock& c) { return c.kind == CostKind::SumOfSquares; });
  }

 private:
  double evaluate(const Vector& z, Vector* grad) const {
    if (grad) grad->setZero(p_.n_vars);
    double total = 0.0;
    Vector r;
    for (const auto& cb : p_.cost) {
      const ResidualBlock& b = cb.block;
      const Vector local = gather(z, b.vars);
      r.resize(b.rows);
      b.eval(local, r);
      Vector w;
      if (cb.kind == CostKind::SumOfSquares) {
        total += r.squaredNorm();
        w = 2.0 * r;
      } else {
        total += r[0];
        w = Vector::Ones(1);
      }
      if (grad) scatter(*grad, b, local, w);
    }
    for (std::size_t i = 0; i < p_.equalities.size(); ++i) {
      const ResidualBlock& b = p_.equalities[i];
      const Vector local = gather(z, b.vars);
      r.resize(b.rows);
      b.eval(local, r);
      const auto lam = lam_->segment(eq_off_[i], b.rows);
      total += lam.dot(r) + 0.5 * mu_ * r.squaredNorm();
      if (grad) scatter(*grad, b, local, lam + mu_ * r);
    }
    for (std::size_t i = 0; i < p_.inequalities.size(); ++i) {
      const ResidualBlock& b = p_.inequalities[i];
      const Vector local = gather(z, b.vars);
      r.resize(b.rows);
      b.eval(local, r);
      const auto nu = nu_->segment(in_off_[i], b.rows);
      const Vector shifted = (nu + mu_ * r).cwiseMax(0.0);
      total += (shifted.squaredNorm() - nu.squaredNorm()) / (2.0 * mu_);
      if (grad && shifted.any()) scatter(*grad, b, local, shifted);
    }
    return total;
  }

  void scatter(Vector& grad, const ResidualBlock& b, const Vector& local, const Vector& weights) const {
    if (weights.isZero(0.0)) return;
    const Matrix J = block_jacobian(b, local, diff_);
    const Vector g = J.transpose() * weights;
    for (std::size_t k = 0; k < b.vars.size(); ++k) grad[b.vars[k]] += g[k];
  }

  const NlpProblem& p_;
  DiffOptions diff_;
  std::vector<int> eq_off_;
  std::vector<int> in_off_;
  const Vector* lam_{nullptr};
  const Vector* nu_{nullptr};
  double mu_{1.0};
};

Vector project(const Vector& y, const Vector& lo, const Vector& hi) { return y.cwiseMax(lo).cwiseMin(hi); }

double projected_gradient_norm(const Vector& y, const Vector& g, const Vector& lo, const Vector& hi) {
  return (y - project(y - g, lo, hi)).lpNorm<Eigen::Infinity>();
}

struct InnerResult {
  Vector y;
  Vector grad;
  double value{0.0};
  double pg_norm{kInf};
  int iterations{0};
};

// Projected L-BFGS on a box. `fg` returns f(y) and fills the gradient when
// asked.
InnerResult lbfgs_box(const std::function<double(const Vector&, Vector*)>& fg, const Vector& y0,
                      const Vector& lo, const Vector& hi, double tol, int max_iter, int memory) {
  InnerResult res;
  res.y = project(y0, lo, hi);
  res.value = fg(res.y, &res.grad);
  std::deque<std::pair<Vector, Vector>> pairs;

  for (int it = 0; it < max_iter; ++it) {
    const Vector& g = res.grad;
    res.pg_norm = projected_gradient_norm(res.y, g, lo, hi);
    if (!std::isfinite(res.value) || !std::isfinite(res.pg_norm)) break;
    if (res.pg_norm <= tol) return res;

    // Variables pinned at a bound by an outward-pointing gradient stay fixed.
    Eigen::Array<bool, Eigen::Dynamic, 1> fixed(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      fixed[i] = (res.y[i] <= lo[i] && g[i] > 0.0) || (res.y[i] >= hi[i] && g[i] < 0.0);
    }
    Vector gm = g;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (fixed[i]) gm[i] = 0.0;

    Vector d = -gm;
    if (!pairs.empty()) {
      std::vector<double> alpha(pairs.size());
      Vector q = gm;
      for (int k = static_cast<int>(pairs.size()) - 1; k >= 0; --k) {
        const auto& [s, yv] = pairs[k];
        alpha[k] = s.dot(q) / yv.dot(s);
        q -= alpha[k] * yv;
      }
      const auto& [s_last, y_last] = pairs.back();
      q *= s_last.dot(y_last) / y_last.squaredNorm();
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& [s, yv] = pairs[k];
        const double beta = yv.dot(q) / yv.dot(s);
        q += s * (alpha[k] - beta);
      }
      d = -q;
      for (Eigen::Index i = 0; i < g.size(); ++i)
        if (fixed[i]) d[i] = 0.0;
      if (!(g.dot(d) < 0.0)) {
        d = -gm;
        pairs.clear();
      }
    }

    double step = pairs.empty() ? std::min(1.0, 1.0 / std::max(1.0, gm.lpNorm<Eigen::Infinity>())) : 1.0;
    bool accepted = false;
    Vector y_new, g_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      y_new = project(res.y + step * d, lo, hi);
      const Vector dy = y_new - res.y;
      if (dy.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = fg(y_new, nullptr);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * g.dot(dy)) {
        accepted = true;
        break;
      }
      // Near a minimizer f changes at rounding level; fall back on the
      // projected gradient so the inner solve can still tighten.
      if (std::isfinite(f_new) && std::abs(f_new - res.value) <= 1e-12 * std::max(1.0, std::abs(res.value))) {
        Vector g_try;
        fg(y_new, &g_try);
        if (projected_gradient_norm(y_new, g_try, lo, hi) < 0.9 * res.pg_norm) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (pairs.empty()) break;  // steepest descent stalled too
      pairs.clear();
      ++res.iterations;
      continue;
    }
    f_new = fg(y_new, &g_new);
    const Vector s = y_new - res.y;
    const Vector yv = g_new - res.grad;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      pairs.emplace_back(s, yv);
      if (static_cast<int>(pairs.size()) > memory) pairs.pop_front();
    }
    res.y = y_new;
    res.grad = g_new;
    res.value = f_new;
    ++res.iterations;
  }
  res.pg_norm = projected_gradient_norm(res.y, res.grad, lo, hi);
  return res;
}

// Projected Levenberg-Marquardt on the Gauss-Newton model of a least-squares
// objective. `sys` returns f(y) and fills the gradient and H when asked.
using GnSystem = std::function<double(const Vector&, Vector*, Eigen::SparseMatrix<double>*)>;

InnerResult gauss_newton_box(const GnSystem& sys, const Vector& y0, const Vector& lo, const Vector& hi, double tol,
                             int max_iter) {
  InnerResult res;
  res.y = project(y0, lo, hi);
  Eigen::SparseMatrix<double> H;
  res.value = sys(res.y, &res.grad, &H);
  double damping = 1e-4;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  const Eigen::Index n = res.y.size();

  int stalled = 0;  // consecutive accepted steps with a rounding-level decrease
  while (res.iterations < max_iter && stalled < 10) {
    const Vector& g = res.grad;
    res.pg_norm = projected_gradient_norm(res.y, g, lo, hi);
    if (!std::isfinite(res.value) || !std::isfinite(res.pg_norm)) break;
    if (res.pg_norm <= tol) return res;

    std::vector<char> free(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      free[i] = lo[i] < hi[i] && !(res.y[i] <= lo[i] && g[i] > 0.0) && !(res.y[i] >= hi[i] && g[i] < 0.0);
    }
    const Vector diag = H.diagonal();
    const double dmax = std::max(diag.maxCoeff(), 1e-12);

    bool accepted = false;
    while (!accepted && damping < 1e12) {
      Eigen::SparseMatrix<double> A = H;
      A.prune([&](Eigen::Index r, Eigen::Index c, double) { return r == c || (free[r] && free[c]); });
      Vector rhs = -g;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (free[i]) {
          A.coeffRef(i, i) += damping * std::max(diag[i], 1e-9 * dmax) + 1e-14 * dmax;
        } else {
          A.coeffRef(i, i) = 1.0;
          rhs[i] = 0.0;
        }
      }
      ldlt.compute(A);
      ++res.iterations;
      if (ldlt.info() != Eigen::Success) {
        damping *= 10.0;
        continue;
      }
      const Vector delta = ldlt.solve(rhs);
      const Vector y_try = project(res.y + delta, lo, hi);
      if ((y_try - res.y).lpNorm<Eigen::Infinity>() == 0.0) break;
      Vector g_try;
      Eigen::SparseMatrix<double> H_try;
      const double f_try = sys(y_try, &g_try, &H_try);
      const bool decrease = std::isfinite(f_try) && f_try < res.value;
      const bool flat = std::isfinite(f_try) && std::abs(f_try - res.value) <= 1e-12 * std::max(1.0, std::abs(res.value)) &&
                        projected_gradient_norm(y_try, g_try, lo, hi) < res.pg_norm;
      if (decrease || flat) {
        stalled = res.value - f_try <= 1e-14 * std::max(1.0, std::abs(res.value)) ? stalled + 1 : 0;
        res.y = y_try;
        res.value = f_try;
        res.grad = g_try;
        H = std::move(H_try);
        damping = std::max(damping / 4.0, 1e-10);
        accepted = true;
      } else {
        damping *= 8.0;
      }
      if (res.iterations >= max_iter) break;
    }
    if (!accepted) break;
  }
  res.pg_norm = projected_gradient_norm(res.y, res.grad, lo, hi);
  return res;
}

}  // namespace

Vector gather(const Vector& z, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = z[idx[k]];
  return out;
}

void NlpProblem::finalize() {
  if (lower.size() == 0) lower = Vector::Constant(n_vars, -kInf);
  if (upper.size() == 0) upper = Vector::Constant(n_vars, kInf);
  if (scale.size() == 0) scale = Vector::Ones(n_vars);
}

void NlpProblem::validate() const {
  if (lower.size() != n_vars || upper.size() != n_vars || scale.size() != n_vars) {
    throw LengthMismatch("bound/scale vectors must have n_vars entries");
  }
  for (int i = 0; i < n_vars; ++i) {
    if (lower[i] > upper[i]) throw InfeasibleBounds("lower bound exceeds upper bound at variable " + std::to_string(i));
    if (!(scale[i] > 0.0)) throw InvalidModel("variable scales must be positive");
  }
  auto check = [&](const ResidualBlock& b) {
    if (!b.eval) throw InvalidModel("residual block without evaluator");
    for (int v : b.vars)
      if (v < 0 || v >= n_vars) throw LengthMismatch("block references variable out of range");
  };
  for (const auto& c : cost) {
    check(c.block);
    if (c.kind == CostKind::Scalar && c.block.rows != 1) throw InvalidModel("scalar cost blocks have one row");
  }
  for (const auto& b : equalities) check(b);
  for (const auto& b : inequalities) check(b);
}

int NlpProblem::equality_count() const { return row_offsets(equalities).back(); }
int NlpProblem::inequality_count() const { return row_offsets(inequalities).back(); }

double NlpProblem::cost_value(const Vector& z) const {
  double total = 0.0;
  Vector r;
  for (const auto& cb : cost) {
    r.resize(cb.block.rows);
    cb.block.eval(gather(z, cb.block.vars), r);
    total += cb.kind == CostKind::SumOfSquares ? r.squaredNorm() : r[0];
  }
  return total;
}

Vector NlpProblem::equality_residuals(const Vector& z) const { return eval_blocks(equalities, z); }
Vector NlpProblem::inequality_residuals(const Vector& z) const { return eval_blocks(inequalities, z); }

double NlpProblem::max_violation(const Vector& z) const {
  double v = bound_violation(*this, z);
  const Vector c = equality_residuals(z);
  if (c.size()) v = std::max(v, c.lpNorm<Eigen::Infinity>());
  const Vector g = inequality_residuals(z);
  if (g.size()) v = std::max(v, g.maxCoeff());
  return std::max(v, 0.0);
}

Vector gradient(const std::function<double(const Vector&)>& f, const Vector& z, const DiffOptions& opt) {
  Vector g(z.size());
  Vector zp = z;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double h = opt.rel_step * std::max(1.0, std::abs(z[j]));
    zp[j] = z[j] + h;
    const double fp = f(zp);
    zp[j] = z[j] - h;
    const double fm = f(zp);
    zp[j] = z[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Matrix jacobian(const std::function<Vector(const Vector&)>& r, const Vector& z, const DiffOptions& opt) {
  Vector zp = z;
  Matrix J;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double h = opt.rel_step * std::max(1.0, std::abs(z[j]));
    zp[j] = z[j] + h;
    const Vector rp = r(zp);
    zp[j] = z[j] - h;
    const Vector rm = r(zp);
    zp[j] = z[j];
    if (j == 0) J.resize(rp.size(), z.size());
    J.col(j) = (rp - rm) / (2.0 * h);
  }
  return J;
}

Matrix block_jacobian(const ResidualBlock& b, const Vector& local, const DiffOptions& opt) {
  Matrix J(b.rows, static_cast<Eigen::Index>(b.vars.size()));
  if (b.jacobian) {
    b.jacobian(local, J);
    return J;
  }
  Vector xp = local;
  Vector rp(b.rows), rm(b.rows);
  for (Eigen::Index j = 0; j < local.size(); ++j) {
    const double h = opt.rel_step * std::max(1.0, std::abs(local[j]));
    xp[j] = local[j] + h;
    b.eval(xp, rp);
    xp[j] = local[j] - h;
    b.eval(xp, rm);
    xp[j] = local[j];
    J.col(j) = (rp - rm) / (2.0 * h);
  }
  return J;
}

Vector cost_gradient(const NlpProblem& p, const Vector& z, const DiffOptions& opt) {
  Vector grad = Vector::Zero(p.n_vars);
  Vector r;
  for (const auto& cb : p.cost) {
    const Vector local = gather(z, cb.block.vars);
    const Matrix J = block_jacobian(cb.block, local, opt);
    Vector w;
    if (cb.kind == CostKind::SumOfSquares) {
      r.resize(cb.block.rows);
      cb.block.eval(local, r);
      w = 2.0 * r;
    } else {
      w = Vector::Ones(1);
    }
    const Vector g = J.transpose() * w;
    for (std::size_t k = 0; k < cb.block.vars.size(); ++k) grad[cb.block.vars[k]] += g[k];
  }
  return grad;
}

void NlpSolverConfig::validate() const {
  if (!(kkt_tol > 0.0 && constraint_tol > 0.0)) throw InvalidModel("solver tolerances must be positive");
  if (!(penalty_growth > 1.0)) throw InvalidModel("penalty growth factor must exceed 1");
  if (!(initial_penalty > 0.0)) throw InvalidModel("initial penalty must be positive");
  if (max_outer_iters < 1 || max_inner_iters < 1) throw InvalidModel("iteration limits must be positive");
}

NlpResult solve_nlp(const NlpProblem& problem_in, const Vector& z0, const NlpSolverConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();
  NlpProblem problem = problem_in;
  problem.finalize();
  problem.validate();
  if (z0.size() != problem.n_vars) throw LengthMismatch("initial point has wrong length");

  const Vector& s = problem.scale;
  const Vector lo = problem.lower.cwiseQuotient(s);
  const Vector hi = problem.upper.cwiseQuotient(s);

  NlpResult out;
  Vector lam = Vector::Zero(problem.equality_count());
  Vector nu = Vector::Zero(problem.inequality_count());
  double mu = cfg.initial_penalty;

  AugmentedLagrangian al(problem, cfg.diff);
  auto fg = [&](const Vector& y, Vector* grad_y) {
    const Vector z = s.cwiseProduct(y);
    if (!grad_y) return al.value(z);
    Vector gz;
    const double v = al.value_and_gradient(z, gz);
    *grad_y = gz.cwiseProduct(s);
    return v;
  };

  const bool use_gn = cfg.inner_method == InnerMethod::GaussNewton ||
                      (cfg.inner_method == InnerMethod::Auto && al.least_squares());
  if (use_gn && !al.least_squares()) throw InvalidModel("Gauss-Newton inner solver needs least-squares costs");
  const auto S = s.asDiagonal();
  GnSystem gn = [&](const Vector& y, Vector* grad_y, Eigen::SparseMatrix<double>* H_y) {
    const Vector z = s.cwiseProduct(y);
    if (!grad_y) return al.value(z);
    Vector gz;
    Eigen::SparseMatrix<double> Hz;
    const double v = al.gauss_newton_system(z, gz, Hz);
    *grad_y = gz.cwiseProduct(s);
    *H_y = S * Hz * S;
    return v;
  };

  Vector y = project(z0.cwiseQuotient(s), lo, hi);
  double viol = problem.max_violation(s.cwiseProduct(y));
  double gscale = std::max(1.0, cost_gradient(problem, s.cwiseProduct(y), cfg.diff).cwiseProduct(s).lpNorm<Eigen::Infinity>());
  double inner_tol = std::max(0.3 * cfg.kkt_tol * gscale, 1e-2 * gscale);
  out.report.status = SolveStatus::MaxIters;
  out.report.violation_history.push_back(viol);
  Vector y_trial = y;
  double kkt = kInf;

  for (int outer = 1; outer <= cfg.max_outer_iters; ++outer) {
    out.report.iterations = outer;
    al.set(lam, nu, mu);
    const InnerResult inner = use_gn ? gauss_newton_box(gn, y_trial, lo, hi, inner_tol, cfg.max_inner_iters)
                                     : lbfgs_box(fg, y_trial, lo, hi, inner_tol, cfg.max_inner_iters, cfg.lbfgs_memory);
    out.report.inner_iterations += inner.iterations;
    if (!std::isfinite(inner.value)) {
      out.report.status = SolveStatus::NumericalFailure;
      break;
    }
    y_trial = inner.y;
    const Vector z = s.cwiseProduct(inner.y);
    const Vector c = problem.equality_residuals(z);
    const Vector g = problem.inequality_residuals(z);
    const double trial_viol = problem.max_violation(z);

    if (trial_viol > viol) {
      if (mu >= cfg.max_penalty) break;  // keep the last accepted iterate
      // Keep accepted violations monotone: retry from here with a stiffer penalty.
      mu = std::min(mu * cfg.penalty_growth, cfg.max_penalty);
      if (cfg.verbose) {
        std::cerr << "[al] outer " << outer << " rejected viol " << trial_viol << " > " << viol << ", mu -> " << mu << "\n";
      }
      continue;
    }

    y = inner.y;
    lam = (lam + mu * c).cwiseMax(-cfg.multiplier_bound).cwiseMin(cfg.multiplier_bound);
    nu = (nu + mu * g).cwiseMax(0.0).cwiseMin(cfg.multiplier_bound);
    const double prev_viol = viol;
    viol = trial_viol;
    out.report.violation_history.push_back(viol);

    gscale = std::max(1.0, cost_gradient(problem, z, cfg.diff).cwiseProduct(s).lpNorm<Eigen::Infinity>());
    double comp = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) comp = std::max(comp, std::abs(std::min(nu[i], -g[i])));
    kkt = std::max(inner.pg_norm / gscale, comp);

    if (cfg.verbose) {
      std::cerr << "[al] outer " << outer << " inner " << inner.iterations << " f " << problem.cost_value(z)
                << " viol " << viol << " kkt " << kkt << " mu " << mu << "\n";
    }
    if (viol <= cfg.constraint_tol && kkt <= cfg.kkt_tol) {
      out.report.status = SolveStatus::Converged;
      break;
    }
    if (viol > cfg.constraint_tol && viol > 0.25 * prev_viol) {
      mu = std::min(mu * cfg.penalty_growth, cfg.max_penalty);
    }
    inner_tol = std::max(0.3 * cfg.kkt_tol * gscale, 0.2 * inner_tol);
  }

  out.z = s.cwiseProduct(y);
  out.eq_multipliers = lam;
  out.ineq_multipliers = nu;
  out.report.kkt_residual = kkt;
  out.report.constraint_violation = viol;
  out.report.objective = problem.cost_value(out.z);
  out.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace lljump::solver
