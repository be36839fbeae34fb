#pragma once

// Dense convex QP:
//   min 1/2 z'Gz + g'z  s.t.  A_eq z = b_eq,  A_in z <= b_in,  lower <= z <= upper
//
// Solved with an operator-splitting (ADMM) iteration and polished by an
// active-set refinement on the equality-constrained KKT system.

#include <Eigen/Dense>

#include <optional>

#include "lljump/solver/report.hpp"

namespace lljump::solver {

struct QpProblem {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  /// Empty means unbounded; entries may be +-infinity.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int n() const { return static_cast<int>(g.size()); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(G * z) + g.dot(z); }
  /// Max violation over equality, inequality and bound rows.
  double violation(const Eigen::VectorXd& z) const;
  void validate() const;
};

struct QpSettings {
  double rho{0.1};
  double rho_min{1e-6};
  double rho_max{1e6};
  double sigma{1e-6};
  double alpha{1.6};
  double eps_abs{1e-8};
  double eps_rel{1e-6};
  int max_iter{4000};
  int adapt_interval{25};
  bool polish{true};
  /// Feasibility and relative KKT tolerance required for status Converged.
  double accept_tol{1e-8};
};

struct QpResult {
  Eigen::VectorXd z;
  /// Multipliers with the sign convention of G z + g + A_eq'y_eq + A_in'y_in + y_bound = 0;
  /// y_in >= 0, y_bound < 0 at a lower bound and > 0 at an upper bound.
  Eigen::VectorXd y_eq;
  Eigen::VectorXd y_in;
  Eigen::VectorXd y_bound;
  SolveReport report;
  bool polished{false};
};

QpResult solve_qp(const QpProblem& qp, const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                  const QpSettings& settings = {});

}  // namespace lljump::solver
