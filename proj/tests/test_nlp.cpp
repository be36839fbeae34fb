#include <doctest.h>

#include <cmath>
#include <random>

#include "lljump/model.hpp"
#include "lljump/solver/nlp.hpp"

using namespace lljump::solver;

namespace {

ResidualBlock block(std::vector<int> vars, int rows, std::function<void(const Vector&, Eigen::Ref<Vector>)> f) {
  ResidualBlock b;
  b.vars = std::move(vars);
  b.rows = rows;
  b.eval = std::move(f);
  return b;
}

NlpProblem rosenbrock(double cost_scale = 1.0) {
  NlpProblem p;
  p.n_vars = 2;
  const double c = std::sqrt(cost_scale);
  p.cost.push_back({block({0, 1}, 2, [c](const Vector& z, Eigen::Ref<Vector> r) {
                      r[0] = c * (1.0 - z[0]);
                      r[1] = c * 10.0 * (z[1] - z[0] * z[0]);
                    }),
                    CostKind::SumOfSquares});
  p.inequalities.push_back(block({0, 1}, 1, [](const Vector& z, Eigen::Ref<Vector> r) {
    r[0] = z[0] * z[0] + z[1] * z[1] - 2.0;
  }));
  return p;
}

}  // namespace

TEST_CASE("finite-difference derivatives") {
  const auto f = [](const Vector& z) { return z.squaredNorm(); };
  const Vector g = gradient(f, Eigen::Vector2d(1, 2));
  CHECK((g - Eigen::Vector2d(2, 4)).norm() < 1e-6);

  Matrix A(3, 2);
  A << 1, 2, -3, 4, 0.5, 7;
  const auto lin = [&](const Vector& z) -> Vector { return A * z + Eigen::Vector3d(1, 1, 1); };
  CHECK((jacobian(lin, Eigen::Vector2d(0.3, -9.0)) - A).norm() < 1e-8);

  // Analytic block Jacobians take precedence.
  ResidualBlock b = block({0}, 1, [](const Vector& z, Eigen::Ref<Vector> r) { r[0] = z[0] * z[0]; });
  b.jacobian = [](const Vector&, Eigen::Ref<Matrix> J) { J(0, 0) = 42.0; };
  CHECK(block_jacobian(b, Vector::Ones(1))(0, 0) == 42.0);
}

TEST_CASE("model step Jacobian agrees across difference schemes") {
  using namespace lljump::model;
  RobotModel m;
  m.body_mass = 25.0;
  m.body_inertia = Eigen::Vector3d(0.4, 1.0, 1.1).asDiagonal();
  for (int i = 0; i < 4; ++i) m.legs.push_back({2.5, Vec3::Zero(), 0.6});
  Control u = Control::zero(m);
  u.feet = {Vec3(0.25, 0.15, 0), Vec3(0.25, -0.15, 0), Vec3(-0.25, 0.15, 0), Vec3(-0.25, -0.15, 0)};
  for (auto& f : u.forces) f = Vec3(5, -3, 90);
  State x;
  x.r = Vec3(0.01, 0.02, 0.45);
  x.q = Quaternion::from_axis_angle(Vec3(0.2, 0.1, 1), 0.3);
  x.H = Vec3(1, 0, 10);
  x.L = Vec3(0.2, -0.1, 2);
  const auto step = [&](const Vector& v) -> Vector {
    return integrate_step_packed(Eigen::Matrix<double, 13, 1>(v), u, 0.02, m);
  };
  const Vector x0 = x.to_vector();
  const Matrix central = jacobian(step, x0);
  Matrix forward(13, 13);
  const Vector f0 = step(x0);
  for (int j = 0; j < 13; ++j) {
    Vector xp = x0;
    xp[j] += 1e-8;
    forward.col(j) = (step(xp) - f0) / 1e-8;
  }
  CHECK((central - forward).norm() <= 1e-4 * central.norm());
}

TEST_CASE("unconstrained convex quadratic") {
  // min (z - c)' Q (z - c) with Q SPD, written as ||Lt (z - c)||^2.
  Matrix M(3, 3);
  M << 2, 0.3, 0, 0.1, 1.5, -0.2, 0, 0.4, 3;
  const Vector c = Eigen::Vector3d(1.0, -2.0, 0.5);
  NlpProblem p;
  p.n_vars = 3;
  p.cost.push_back({block({0, 1, 2}, 3, [=](const Vector& z, Eigen::Ref<Vector> r) { r = M * (z - c); }),
                    CostKind::SumOfSquares});
  NlpSolverConfig cfg;
  cfg.kkt_tol = 1e-11;
  for (const Vector& z0 : {Vector(Vector::Zero(3)), Vector(Eigen::Vector3d(50, -30, 7))}) {
    const NlpResult r = solve_nlp(p, z0, cfg);
    REQUIRE(r.report.converged());
    CHECK((r.z - c).norm() < 1e-8);
  }
}

TEST_CASE("constrained Rosenbrock") {
  // Grid-search oracle over the feasible disk confirms the optimum region.
  double best = 1e300;
  Eigen::Vector2d arg;
  for (int i = -300; i <= 300; ++i) {
    for (int j = -300; j <= 300; ++j) {
      const double a = i * 0.005, b = j * 0.005;
      if (a * a + b * b > 2.0) continue;
      const double f = (1 - a) * (1 - a) + 100 * (b - a * a) * (b - a * a);
      if (f < best) {
        best = f;
        arg = {a, b};
      }
    }
  }
  CHECK((arg - Eigen::Vector2d(1, 1)).norm() < 0.02);

  NlpSolverConfig cfg;
  cfg.kkt_tol = 1e-10;
  cfg.constraint_tol = 1e-10;
  const NlpResult r = solve_nlp(rosenbrock(), Eigen::Vector2d(-1.2, 1.0), cfg);
  REQUIRE(r.report.converged());
  CHECK((r.z - Eigen::Vector2d(1, 1)).norm() < 1e-5);

  // Scaling the cost leaves the minimizer unchanged.
  const NlpResult r2 = solve_nlp(rosenbrock(250.0), Eigen::Vector2d(-1.2, 1.0), cfg);
  REQUIRE(r2.report.converged());
  CHECK((r2.z - r.z).norm() < 1e-5);
}

TEST_CASE("active inequality and bounds") {
  // min (a-2)^2 + (b-2)^2 s.t. a + b <= 2, 0 <= a <= 0.25 -> a = 0.25, b = 1.75
  NlpProblem p;
  p.n_vars = 2;
  p.cost.push_back({block({0, 1}, 2, [](const Vector& z, Eigen::Ref<Vector> r) { r = z.array() - 2.0; }),
                    CostKind::SumOfSquares});
  p.inequalities.push_back(block({0, 1}, 1, [](const Vector& z, Eigen::Ref<Vector> r) { r[0] = z[0] + z[1] - 2.0; }));
  p.lower = Eigen::Vector2d(0.0, -1e20);
  p.upper = Eigen::Vector2d(0.25, 1e20);
  NlpSolverConfig cfg;
  cfg.kkt_tol = 1e-9;
  cfg.constraint_tol = 1e-9;
  const NlpResult r = solve_nlp(p, Eigen::Vector2d(5, 5), cfg);
  REQUIRE(r.report.converged());
  CHECK((r.z - Eigen::Vector2d(0.25, 1.75)).norm() < 1e-7);
  CHECK(r.ineq_multipliers[0] == doctest::Approx(0.5).epsilon(1e-5));
  for (std::size_t k = 1; k < r.report.violation_history.size(); ++k) {
    CHECK(r.report.violation_history[k] <= r.report.violation_history[k - 1]);
  }
}

TEST_CASE("double integrator shooting problem matches the LQ solution") {
  // 5 knots (4 segments), state (p, v), control a per segment.
  // min sum a_k^2  s.t.  x0 = (0, 0), x4 = (1, 0).
  const int K = 4;
  const double dt = 0.25;
  Eigen::Matrix2d A;
  A << 1, dt, 0, 1;
  const Eigen::Vector2d B(0.5 * dt * dt, dt);

  // Closed-form minimum-norm control: the final state is linear in a.
  Matrix Bbig(2, K);
  for (int k = 0; k < K; ++k) {
    Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
    for (int j = k + 1; j < K; ++j) P = A * P;
    Bbig.col(k) = P * B;
  }
  const Eigen::Vector2d target(1.0, 0.0);
  const Vector a_star = Bbig.transpose() * (Bbig * Bbig.transpose()).ldlt().solve(target);

  // Decision vector: [p0 v0 a0 | p1 v1 a1 | ... | p4 v4]
  const auto px = [](int k) { return 3 * k; };
  NlpProblem p;
  p.n_vars = 3 * K + 2;
  p.lower = Vector::Constant(p.n_vars, -1e20);
  p.upper = Vector::Constant(p.n_vars, 1e20);
  p.lower.segment(0, 2).setZero();
  p.upper.segment(0, 2).setZero();
  p.lower[px(K)] = p.upper[px(K)] = 1.0;
  p.lower[px(K) + 1] = p.upper[px(K) + 1] = 0.0;
  for (int k = 0; k < K; ++k) {
    p.cost.push_back({block({px(k) + 2}, 1, [](const Vector& z, Eigen::Ref<Vector> r) { r[0] = z[0]; }),
                      CostKind::SumOfSquares});
    p.equalities.push_back(block({px(k), px(k) + 1, px(k) + 2, px(k + 1), px(k + 1) + 1}, 2,
                                 [=](const Vector& z, Eigen::Ref<Vector> r) {
                                   const Eigen::Vector2d x(z[0], z[1]);
                                   const Eigen::Vector2d nxt = A * x + B * z[2];
                                   r[0] = z[3] - nxt[0];
                                   r[1] = z[4] - nxt[1];
                                 }));
  }
  NlpSolverConfig cfg;
  cfg.kkt_tol = 1e-9;
  cfg.constraint_tol = 1e-9;
  const NlpResult r = solve_nlp(p, Vector::Zero(p.n_vars), cfg);
  INFO(nlohmann::json(r.report).dump());
  REQUIRE(r.report.converged());
  for (int k = 0; k < K; ++k) CHECK(std::abs(r.z[px(k) + 2] - a_star[k]) < 1e-5);
}

TEST_CASE("solver is deterministic") {
  const NlpResult a = solve_nlp(rosenbrock(), Eigen::Vector2d(-1.2, 1.0));
  const NlpResult b = solve_nlp(rosenbrock(), Eigen::Vector2d(-1.2, 1.0));
  CHECK(a.z == b.z);
  CHECK(a.report.iterations == b.report.iterations);
}

TEST_CASE("config validation") {
  NlpSolverConfig cfg;
  cfg.penalty_growth = 1.0;
  CHECK_THROWS(solve_nlp(rosenbrock(), Eigen::Vector2d(0, 0), cfg));
}
