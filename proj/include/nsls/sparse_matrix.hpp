#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nsls {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

// One matrix row with the statistics the sampling schemes need. Rows are
// immutable after construction; an all-zero row is stored empty and carries
// numerical_sparsity = 0 by convention (it gets zero sampling mass anyway).
struct SparseRow {
  std::vector<int> indices;    // strictly increasing
  std::vector<double> values;  // nonzero, same length
  double l1_norm = 0.0;        // sum of |values|
  double l2_norm_sq = 0.0;     // sum of values^2
  double numerical_sparsity = 0.0;  // l1^2 / l2^2, in [1, nnz]

  int nnz() const { return static_cast<int>(indices.size()); }
  bool empty() const { return indices.empty(); }
  double dot(const Vector& x) const;
  // y += scale * row
  void add_to(Vector& y, double scale) const;
};

// Immutable row-major sparse matrix. Construction validates every row
// statistic; instances are safe to share across threads.
class RowMatrix {
 public:
  RowMatrix(int n_rows, int n_cols, std::vector<SparseRow> rows);

  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }
  const SparseRow& row(int i) const { return rows_[i]; }
  const std::vector<SparseRow>& rows() const { return rows_; }
  double frobenius_sq() const { return frobenius_sq_; }
  double row_l2_sq_max() const { return row_l2_sq_max_; }
  std::int64_t nnz() const { return nnz_; }

  // A^T A x and A^T (A x - b), both O(nnz).
  Vector gram_apply(const Vector& x) const;
  Vector residual_gradient(const Vector& x, const Vector& b) const;
  Vector apply(const Vector& x) const;  // A x
  DenseMatrix densify() const;

 private:
  int n_rows_;
  int n_cols_;
  std::vector<SparseRow> rows_;
  double frobenius_sq_ = 0.0;
  double row_l2_sq_max_ = 0.0;
  std::int64_t nnz_ = 0;
};

// Estimates of the spectral quantities the solvers are configured from.
// mu_est = 0 flags a (numerically) rank-deficient Gram matrix; regression
// configuration rejects such instances.
struct SpectralStats {
  double lambda1_est = 0.0;      // lambda_1(A^T A)
  double mu_est = 0.0;           // lambda_d(A^T A)
  double stable_rank_est = 0.0;  // ||A||_F^2 / lambda_1
  double kappa_est = 0.0;        // ||A||_F^2 / mu
  double gap_est = 0.0;          // (lambda_1 - lambda_2) / lambda_1
  bool dense_path = false;       // exact dense spectrum was affordable
};

// Exact spectral oracles are only used up to this many stored entries
// (n_rows * n_cols); above it mu/gap must be user-supplied.
inline constexpr std::int64_t kDenseOracleLimit = 250000;

SparseRow make_row(const std::vector<int>& indices,
                   const std::vector<double>& values);

// Entries with |v| <= drop_tol are omitted. Throws on non-finite input,
// with the offending coordinate in the message.
RowMatrix from_dense(const DenseMatrix& values, double drop_tol = 0.0);

// Matrix Market, coordinate and array variants, real general only.
// Duplicate coordinate entries are summed (the format leaves this loose).
RowMatrix load_matrix_market(const std::string& path);
void save_matrix_market(const RowMatrix& mat, const std::string& path);

// Power iteration for lambda_1; inverse power iteration through a dense
// factorization for mu when the matrix is small enough, otherwise mu/gap
// are left for the caller to supply.
SpectralStats estimate_spectral(const RowMatrix& mat, int power_iters,
                                std::uint64_t seed,
                                std::int64_t dense_limit = kDenseOracleLimit);

// Appends sqrt(lam) * e_j rows so that
//   ||Ãx - b̃||^2 = ||Ax - b||^2 + lam * ||x - x0||^2  for all x.
std::pair<RowMatrix, Vector> augment_ridge(const RowMatrix& mat,
                                           const Vector& b, double lam,
                                           const Vector& x0);

}  // namespace nsls
