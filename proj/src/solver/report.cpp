#include "lljump/solver/report.hpp"

#include "lljump/errors.hpp"

namespace lljump::solver {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "NumericalFailure";
}

SolveStatus status_from_string(const std::string& s) {
  if (s == "Converged") return SolveStatus::Converged;
  if (s == "MaxIters") return SolveStatus::MaxIters;
  if (s == "Infeasible") return SolveStatus::Infeasible;
  if (s == "NumericalFailure") return SolveStatus::NumericalFailure;
  throw SchemaError("unknown solve status '" + s + "'");
}

void to_json(nlohmann::json& j, const SolveReport& r) {
  j = nlohmann::json{{"status", to_string(r.status)},
                     {"iterations", r.iterations},
                     {"inner_iterations", r.inner_iterations},
                     {"kkt_residual", r.kkt_residual},
                     {"constraint_violation", r.constraint_violation},
                     {"objective", r.objective},
                     {"wall_time_s", r.wall_time_s},
                     {"violation_history", r.violation_history}};
}

void from_json(const nlohmann::json& j, SolveReport& r) {
  r.status = status_from_string(j.at("status").get<std::string>());
  r.iterations = j.at("iterations").get<int>();
  r.inner_iterations = j.value("inner_iterations", 0);
  r.kkt_residual = j.at("kkt_residual").get<double>();
  r.constraint_violation = j.at("constraint_violation").get<double>();
  r.objective = j.value("objective", 0.0);
  r.wall_time_s = j.value("wall_time_s", 0.0);
  r.violation_history = j.value("violation_history", std::vector<double>{});
}

}  // namespace lljump::solver
