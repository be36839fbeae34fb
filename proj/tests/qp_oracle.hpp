#pragma once

// Brute-force QP oracle: enumerate every subset of inequality rows as the
// active set, keep KKT points that are primal feasible with nonnegative
// multipliers, and return the best objective.

#include <Eigen/Dense>

#include <limits>
#include <optional>

namespace qp_oracle {

struct Problem {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;  // A_in z <= b_in
  Eigen::VectorXd b_in;
};

struct Solution {
  Eigen::VectorXd z;
  double objective;
};

inline std::optional<Solution> enumerate(const Problem& p, double tol = 1e-9) {
  const int n = static_cast<int>(p.g.size());
  const int me = static_cast<int>(p.A_eq.rows());
  const int mi = static_cast<int>(p.A_in.rows());
  std::optional<Solution> best;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int k = me + static_cast<int>(act.size());
    if (k > n) continue;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = p.G;
    rhs.head(n) = -p.g;
    for (int r = 0; r < me; ++r) {
      K.block(n + r, 0, 1, n) = p.A_eq.row(r);
      K.block(0, n + r, n, 1) = p.A_eq.row(r).transpose();
      rhs[n + r] = p.b_eq[r];
    }
    for (std::size_t j = 0; j < act.size(); ++j) {
      const int r = me + static_cast<int>(j);
      K.block(n + r, 0, 1, n) = p.A_in.row(act[j]);
      K.block(0, n + r, n, 1) = p.A_in.row(act[j]).transpose();
      rhs[n + r] = p.b_in[act[j]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd z = sol.head(n);
    bool ok = true;
    for (std::size_t j = 0; j < act.size() && ok; ++j) ok = sol[n + me + static_cast<int>(j)] >= -tol;
    if (mi) ok = ok && ((p.A_in * z - p.b_in).maxCoeff() <= tol);
    if (!ok) continue;
    const double obj = 0.5 * z.dot(p.G * z) + p.g.dot(z);
    if (!best || obj < best->objective) best = Solution{z, obj};
  }
  return best;
}

}  // namespace qp_oracle
