#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nsls/rng.hpp"
#include "nsls/sparse_matrix.hpp"

namespace nsls::oracle {

// Dense ground truth for the solvers. Correctness-only: everything here is
// O(n d^2) or worse and refuses to run past the desk-scale limit.
class DenseOracle {
 public:
  explicit DenseOracle(const RowMatrix& mat,
                       std::int64_t limit = kDenseOracleLimit);

  const DenseMatrix& gram() const { return gram_; }
  const Vector& eigenvalues() const { return eigenvalues_; }  // descending
  Vector top_eigenvector() const;
  double lambda1() const { return eigenvalues_[0]; }
  double lambda_min() const { return eigenvalues_[eigenvalues_.size() - 1]; }
  double gap() const;

  // argmin ||Ax - b||_2; throws if the Gram matrix is singular.
  Vector solve_normal_equations(const Vector& b) const;
  // Least-squares minimizer through the eigendecomposition (pseudo-inverse);
  // defined even for singular instances.
  Vector least_squares(const Vector& b) const;
  double f_star(const Vector& b) const;  // min_x 0.5 ||Ax - b||^2

  // x* for the shifted system (lam I - A^T A) x = rhs; requires lam > lambda1.
  Vector solve_shifted(double lam, const Vector& rhs) const;

 private:
  const RowMatrix* mat_;
  DenseMatrix dense_;
  DenseMatrix gram_;
  DenseMatrix eigvecs_;   // columns, descending eigenvalue order
  Vector eigenvalues_;
};

Vector dense_solve(const RowMatrix& mat, const Vector& b);
std::pair<Vector, Vector> dense_spectrum(const RowMatrix& mat);

// (f(x) - f(x*), ||A (x - x*)||_2^2); the two are related by
// 2 (f(x) - f(x*)) = ||A(x - x*)||_2^2 exactly.
std::pair<double, double> function_gap(const RowMatrix& mat, const Vector& b,
                                       const Vector& x);

// ---------------------------------------------------------------------------
// Exact enumeration of estimator sample spaces. These re-derive every
// distribution from the raw rows (including the top-c tie rule and the
// exact-row short circuit) so they stay independent of the sampling module.
// Enumeration treats the c iid draws of a stage as ordered tuples.
// ---------------------------------------------------------------------------

inline constexpr long kEnumerationBudget = 100000;

struct VectorMoments {
  Vector mean;
  double second_moment = 0.0;  // E ||.||_2^2
  long space_size = 0;
};

struct ScalarMoments {
  double mean = 0.0;
  double second_moment = 0.0;  // E (.)^2
  long space_size = 0;
};

VectorMoments enumerate_samplevec(const SparseRow& row, int budget, int dim,
                                  long space_budget = kEnumerationBudget);
ScalarMoments enumerate_sampledotproduct(const SparseRow& row, int budget,
                                         const Vector& x,
                                         long space_budget = kEnumerationBudget);
VectorMoments enumerate_samplerankonemat(const SparseRow& row, int budget,
                                         const Vector& x,
                                         long space_budget = kEnumerationBudget);
VectorMoments enumerate_samplemat(const RowMatrix& mat, double k,
                                  const Vector& x,
                                  long space_budget = kEnumerationBudget,
                                  bool force_exact = false);

// Second-moment bounds the enumerated/measured estimators are checked
// against.
double bound_samplevec(const SparseRow& row, int budget);
double bound_sampledotproduct(const SparseRow& row, int budget, const Vector& x);
double bound_samplerankonemat(const SparseRow& row, int budget, const Vector& x);
double bound_samplemat(const RowMatrix& mat, double k, const Vector& x,
                       bool force_exact = false);

// ---------------------------------------------------------------------------
// Monte Carlo moment measurement.
// ---------------------------------------------------------------------------

struct MomentReport {
  double mean_err = 0.0;       // ||empirical mean - target||_2
  double mean_err_scale = 0.0; // 3-sigma scale for the mean error
  double second_moment = 0.0;  // empirical E ||.||_2^2
  double bound = 0.0;
  double stderr_sm = 0.0;      // standard error of the second moment
  long draws = 0;
  bool mean_ok = false;
  bool second_ok = false;
  bool pass() const { return mean_ok && second_ok; }
};

// estimator fills `out` (pre-sized dense vector) with one draw.
MomentReport monte_carlo_moments(
    const std::function<void(Rng&, Vector&)>& estimator, const Vector& target,
    double bound, long draws, Rng rng);

// ---------------------------------------------------------------------------
// Per-lemma verification suite used by the verify command.
// ---------------------------------------------------------------------------

struct PropertyCheck {
  std::string property;
  bool pass = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct VerifyOptions {
  long draws = 100000;
  long enum_budget = kEnumerationBudget;
  std::uint64_t seed = 1;
  // Test hook: scales every sampled estimate; anything != 1 must be caught
  // by the mean checks.
  double bias = 1.0;
};

std::vector<PropertyCheck> verify_matrix(const RowMatrix& mat, double k,
                                      const VerifyOptions& opts);

}  // namespace nsls::oracle
