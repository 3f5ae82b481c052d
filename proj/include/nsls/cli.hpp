#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace nsls {

// Exit codes: 0 success, 2 non-convergence / failed verification,
// 3 input error, 4 config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitInputError = 3;
inline constexpr int kExitConfigError = 4;

// Fully serializable run description; a run is reproducible from this alone.
struct RunConfig {
  std::string command;      // solve-regression | top-eigenvector | gen | stats | verify
  std::string input_path;
  std::string rhs_path;     // optional b for regression (MatrixMarket vector)
  std::string output_path;  // empty: stdout
  std::string format = "json";  // json | csv
  double epsilon = 1e-4;
  std::uint64_t seed = 1;
  bool accel = false;
  bool run_mu_search = false;
  int max_epochs = 0;   // regression epoch budget / accel outer steps
  int max_outers = 0;   // eigensolver outer iteration budget
  std::optional<double> k_override;
  std::optional<double> mu_override;
  std::optional<double> lambda1_override;
  std::optional<double> gap_override;
  std::optional<double> accel_lam_override;    // regression prox weight
  std::optional<double> accel_gamma_override;  // eigensolver prox weight
  long verify_draws = 100000;
  // gen command
  int gen_rows = 0;
  int gen_cols = 0;
  double gen_target_s = 1.0;
  double gen_row_norm = 1.0;
  std::string gen_spectrum = "none";  // none | flat | geom
  double gen_cond = 100.0;            // lambda_1/lambda_d for geom
};

std::string run_config_to_json(const RunConfig& cfg);

int cmd_solve_regression(const RunConfig& cfg);
int cmd_top_eigenvector(const RunConfig& cfg);
int cmd_gen(const RunConfig& cfg);
int cmd_stats(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);

// argv-level entry point (CLI11); used by the nsls binary and by tests.
int cli_main(int argc, const char* const* argv);

}  // namespace nsls
