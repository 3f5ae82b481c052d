#pragma once

#include <cstdint>
#include <optional>

#include "nsls/sparse_matrix.hpp"

namespace nsls {

// Synthetic family spec: dense rows whose magnitude profile is a power law
// |a|_(j) proportional to (j+1)^(-decay), permuted and sign-flipped per row.
// The decay exponent is solved by bisection so the profile's numerical
// sparsity hits target_s; an explicit decay overrides that. When a target
// spectrum for A^T A is given the generated matrix is reshaped to carry it
// exactly (thin SVD against the dense oracle; desk scale only).
struct GenSpec {
  int n_rows = 0;
  int n_cols = 0;
  double target_s = 1.0;
  std::optional<double> decay;
  std::optional<Vector> spectrum;  // eigenvalues of A^T A, descending
  double row_norm = 1.0;
  std::uint64_t seed = 1;
};

RowMatrix generate(const GenSpec& spec);

// Numerical sparsity of the power-law profile (j+1)^(-decay) on d entries.
double profile_numerical_sparsity(double decay, int d);
double solve_decay_for_target_s(double target_s, int d);

struct FamilySummary {
  double mean_numerical_sparsity = 0.0;
  double stable_rank = 0.0;
  double kappa = 0.0;
  double gap = 0.0;
  std::int64_t nnz = 0;
};

FamilySummary measure_family(const RowMatrix& mat,
                             std::int64_t dense_limit = kDenseOracleLimit);

}  // namespace nsls
