#pragma once

// Block-structured nonlinear program and its augmented-Lagrangian solver.
//
// Every cost term and constraint group is a ResidualBlock reading a small set
// of decision variables. The block structure doubles as the sparsity pattern:
// finite-difference derivatives only perturb the variables a block reads.

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "lljump/solver/report.hpp"

namespace lljump::solver {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ResidualBlock {
  /// Global indices of the variables the block reads, in the order the
  /// evaluator expects them.
  std::vector<int> vars;
  int rows{0};
  std::function<void(const Vector& local, Eigen::Ref<Vector> out)> eval;
  /// Optional analytic Jacobian (rows x vars.size()); takes precedence over
  /// finite differences when set.
  std::function<void(const Vector& local, Eigen::Ref<Matrix> jac)> jacobian;
};

enum class CostKind {
  SumOfSquares,  ///< contributes ||r||^2
  Scalar,        ///< single row, contributes r[0]
};

struct CostBlock {
  ResidualBlock block;
  CostKind kind{CostKind::SumOfSquares};
};

struct NlpProblem {
  int n_vars{0};
  Vector lower;
  Vector upper;
  /// Typical magnitude of each variable; the solver iterates on z / scale.
  Vector scale;
  std::vector<CostBlock> cost;
  std::vector<ResidualBlock> equalities;    ///< c(z) = 0
  std::vector<ResidualBlock> inequalities;  ///< g(z) <= 0

  /// Fills default bounds (+-inf) and unit scales where unset.
  void finalize();
  void validate() const;

  int equality_count() const;
  int inequality_count() const;

  double cost_value(const Vector& z) const;
  Vector equality_residuals(const Vector& z) const;
  Vector inequality_residuals(const Vector& z) const;
  /// max(|c|_inf, max(g, 0)) including bound violations.
  double max_violation(const Vector& z) const;
};

Vector gather(const Vector& z, const std::vector<int>& idx);

struct DiffOptions {
  /// Central-difference step is rel_step * max(1, |z_j|).
  double rel_step{1e-6};
};

/// Central-difference gradient of a scalar function.
Vector gradient(const std::function<double(const Vector&)>& f, const Vector& z,
                const DiffOptions& opt = {});

/// Central-difference Jacobian of a vector function.
Matrix jacobian(const std::function<Vector(const Vector&)>& r, const Vector& z,
                const DiffOptions& opt = {});

/// Jacobian of one block at its local variables (analytic when provided).
Matrix block_jacobian(const ResidualBlock& b, const Vector& local, const DiffOptions& opt = {});

/// Gradient of NlpProblem::cost_value, assembled block by block.
Vector cost_gradient(const NlpProblem& p, const Vector& z, const DiffOptions& opt = {});

enum class InnerMethod {
  Auto,         ///< Gauss-Newton when every cost block is least-squares, else L-BFGS
  Lbfgs,        ///< projected L-BFGS
  GaussNewton,  ///< projected Levenberg-Marquardt on the sparse Gauss-Newton model
};

struct NlpSolverConfig {
  int max_outer_iters{500};
  /// Inner iteration cap (L-BFGS steps or Levenberg-Marquardt factorizations).
  int max_inner_iters{3000};
  double kkt_tol{1e-4};
  double constraint_tol{1e-4};
  double initial_penalty{10.0};
  double penalty_growth{10.0};
  double max_penalty{1e8};
  /// Multipliers are clipped to +-multiplier_bound.
  double multiplier_bound{1e10};
  InnerMethod inner_method{InnerMethod::Auto};
  int lbfgs_memory{10};
  DiffOptions diff{};
  /// Print one line per outer iteration to stderr.
  bool verbose{false};

  void validate() const;
};

struct NlpResult {
  Vector z;
  Vector eq_multipliers;
  Vector ineq_multipliers;
  SolveReport report;
};

/// Augmented-Lagrangian method with a bound-constrained quasi-Newton or
/// Gauss-Newton inner solver.
///
/// KKT residual: infinity norm of the bound-projected Lagrangian gradient in
/// scaled variables, divided by max(1, |scaled cost gradient|_inf).
/// Accepted outer iterates never increase the max constraint violation: a
/// trial point that would is rejected and the penalty is raised instead.
NlpResult solve_nlp(const NlpProblem& problem, const Vector& z0, const NlpSolverConfig& cfg = {});

}  // namespace lljump::solver
