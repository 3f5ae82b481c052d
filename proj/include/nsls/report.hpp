#pragma once

#include <map>
#include <string>
#include <vector>

namespace nsls {

// Convergence trace shared by the solvers and the CLI. Coordinate touches are
// the primary cost metric: every coordinate slot an inner step reads or
// writes, plus an nnz charge per full-gradient pass. Wall time is
// informational only and excluded from determinism comparisons.
struct SolveReport {
  bool converged = false;
  int epochs = 0;
  long inner_steps = 0;
  long coordinate_touches = 0;
  int full_gradient_evals = 0;
  std::string final_metric_name;   // "ata_norm_ratio" | "rayleigh_quotient"
  double final_metric_value = 0.0;
  std::map<std::string, double> metrics;  // secondary measured values
  std::vector<double> residual_trace;
  std::vector<std::string> clamps_and_warnings;
  double wall_time_ms = 0.0;
  std::string config_echo;  // serialized RunConfig, filled by the CLI layer

  void merge_counters(const SolveReport& other);
  void warn(const std::string& message);
};

std::string report_to_json(const SolveReport& report, int indent = 2);
std::string report_to_csv(const SolveReport& report);

}  // namespace nsls
