#pragma once

#include <optional>

#include "nsls/report.hpp"
#include "nsls/sparse_matrix.hpp"
#include "nsls/svrg.hpp"

namespace nsls {

struct RegressionProblem {
  const RowMatrix* mat = nullptr;
  Vector b;
  double mu = 0.0;  // lambda_d(A^T A), user-supplied or searched
  Vector x_init;    // defaults to zero when empty
};

struct AccelOptions {
  bool enabled = false;
  std::optional<double> lam_override;
};

struct RegressionConfig {
  double epsilon = 1e-4;  // target ratio in the A^T A norm
  std::optional<double> k_override;
  std::uint64_t seed = 1;
  int max_epochs = 0;  // 0: derived from epsilon
  AccelOptions accel;
  SvrgOverrides svrg;
  // Use the dense oracle for the stopping metric when the instance fits the
  // desk-scale limit; otherwise a gradient-norm surrogate is used.
  std::int64_t dense_limit = kDenseOracleLimit;
};

std::pair<Vector, SolveReport> solve_regression(const RegressionProblem& prob,
                                                const RegressionConfig& cfg);

std::pair<Vector, SolveReport> solve_regression_accelerated(
    const RegressionProblem& prob, const RegressionConfig& cfg);

struct MuSearchOptions {
  double mu_hi = 0.0;  // 0: ||A||_F^2
  double mu_lo_factor = 1e-12;
  int probe_epochs = 2;
  // An exactly sized candidate gives a per-epoch factor near 1/64, a 2x
  // overstatement near 1/16; this threshold separates them from >= 4x.
  double accept_ratio = 0.1;
  long probe_step_cap = 2000000;
  std::uint64_t seed = 7;
};

// Geometric search over strong-convexity candidates; a candidate is accepted
// when SVRG configured with it empirically contracts over probe epochs
// (after a burn-in that flushes the fast modes). Returns the largest
// accepted candidate. At desk scale a singular Gram matrix is detected
// through the dense oracle; above it the search characterizes the smallest
// eigenvalue that is visible in the function gap.
double mu_search(const RowMatrix& mat, const Vector& b,
                 const MuSearchOptions& opts = {});

}  // namespace nsls
