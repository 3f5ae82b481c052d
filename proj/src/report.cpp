#include "nsls/report.hpp"

#include <sstream>

#include "json.hpp"

namespace nsls {

void SolveReport::merge_counters(const SolveReport& other) {
  epochs += other.epochs;
  inner_steps += other.inner_steps;
  coordinate_touches += other.coordinate_touches;
  full_gradient_evals += other.full_gradient_evals;
  for (const std::string& w : other.clamps_and_warnings)
    clamps_and_warnings.push_back(w);
}

void SolveReport::warn(const std::string& message) {
  clamps_and_warnings.push_back(message);
}

std::string report_to_json(const SolveReport& report, int indent) {
  nlohmann::ordered_json j;
  j["converged"] = report.converged;
  j["epochs"] = report.epochs;
  j["inner_steps"] = report.inner_steps;
  j["coordinate_touches"] = report.coordinate_touches;
  j["full_gradient_evals"] = report.full_gradient_evals;
  j["final_metrics"] = {{report.final_metric_name, report.final_metric_value}};
  for (const auto& [key, value] : report.metrics) j["metrics"][key] = value;
  j["residual_trace"] = report.residual_trace;
  j["clamps_and_warnings"] = report.clamps_and_warnings;
  j["wall_time_ms"] = report.wall_time_ms;
  if (!report.config_echo.empty())
    j["config"] = nlohmann::ordered_json::parse(report.config_echo);
  return j.dump(indent);
}

std::string report_to_csv(const SolveReport& report) {
  std::ostringstream os;
  os << "field,value\n";
  os << "converged," << (report.converged ? 1 : 0) << "\n";
  os << "epochs," << report.epochs << "\n";
  os << "inner_steps," << report.inner_steps << "\n";
  os << "coordinate_touches," << report.coordinate_touches << "\n";
  os << "full_gradient_evals," << report.full_gradient_evals << "\n";
  os << report.final_metric_name << "," << report.final_metric_value << "\n";
  for (const auto& [key, value] : report.metrics)
    os << key << "," << value << "\n";
  os << "warnings," << report.clamps_and_warnings.size() << "\n";
  os << "wall_time_ms," << report.wall_time_ms << "\n";
  return os.str();
}

}  // namespace nsls
