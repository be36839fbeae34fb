#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace lljump::solver {

enum class SolveStatus { Converged, MaxIters, Infeasible, NumericalFailure };

std::string to_string(SolveStatus s);
SolveStatus status_from_string(const std::string& s);

struct SolveReport {
  SolveStatus status{SolveStatus::NumericalFailure};
  int iterations{0};
  /// Inner (quasi-Newton) iterations summed over all outer iterations; NLP only.
  int inner_iterations{0};
  double kkt_residual{0.0};
  double constraint_violation{0.0};
  double objective{0.0};
  double wall_time_s{0.0};
  /// Max constraint violation after each accepted outer iteration; NLP only.
  std::vector<double> violation_history;

  bool converged() const { return status == SolveStatus::Converged; }
};

void to_json(nlohmann::json& j, const SolveReport& r);
void from_json(const nlohmann::json& j, SolveReport& r);

}  // namespace lljump::solver
