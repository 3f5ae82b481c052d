#include "nsls/generator.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nsls/rng.hpp"

namespace nsls {

double profile_numerical_sparsity(double decay, int d) {
  double l1 = 0.0, l2 = 0.0;
  for (int j = 0; j < d; ++j) {
    const double m = std::pow(static_cast<double>(j + 1), -decay);
    l1 += m;
    l2 += m * m;
  }
  return l1 * l1 / l2;
}

double solve_decay_for_target_s(double target_s, int d) {
  // s(decay) is monotone decreasing from s(0) = d toward 1;
  // the cap keeps the smallest profile entry far from underflow.
  const double decay_max = 20.0;
  if (target_s >= d) return 0.0;
  double lo = 0.0, hi = decay_max;
  if (profile_numerical_sparsity(hi, d) > target_s) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (profile_numerical_sparsity(mid, d) > target_s ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

DenseMatrix draw_rows(int n, int d, double decay, double row_norm,
                      std::uint64_t seed) {
  Vector profile(d);
  for (int j = 0; j < d; ++j)
    profile[j] = std::pow(static_cast<double>(j + 1), -decay);
  profile *= row_norm / profile.norm();

  Rng rng(seed);
  DenseMatrix dense(n, d);
  std::vector<int> perm(d);
  for (int i = 0; i < n; ++i) {
    Rng row_rng = rng.split(i);
    std::iota(perm.begin(), perm.end(), 0);
    for (int j = d - 1; j > 0; --j)
      std::swap(perm[j], perm[row_rng.next_below(j + 1)]);
    for (int j = 0; j < d; ++j) {
      const double sign = row_rng.next_u64() & 1 ? 1.0 : -1.0;
      dense(i, perm[j]) = sign * profile[j];
    }
  }
  return dense;
}

// A' = U diag(sqrt(target)) V^T carries the requested A^T A spectrum exactly
// while staying as close as possible to the drawn rows.
DenseMatrix shape_spectrum(const DenseMatrix& dense, const Vector& target) {
  Eigen::BDCSVD<DenseMatrix> svd(dense,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector roots = target.cwiseSqrt();
  return svd.matrixU() * roots.asDiagonal() * svd.matrixV().transpose();
}

double mean_sparsity(const DenseMatrix& dense) {
  double total = 0.0;
  for (int i = 0; i < dense.rows(); ++i) {
    const double l1 = dense.row(i).cwiseAbs().sum();
    const double l2 = dense.row(i).squaredNorm();
    total += l1 * l1 / l2;
  }
  return total / dense.rows();
}

}  // namespace

RowMatrix generate(const GenSpec& spec) {
  const int n = spec.n_rows;
  const int d = spec.n_cols;
  if (n < 1 || d < 1) throw std::invalid_argument("generate: empty shape");
  if (!(spec.target_s >= 1.0 && spec.target_s <= d))
    throw std::invalid_argument("generate: target_s must lie in [1, d]");
  if (!(spec.row_norm > 0.0))
    throw std::invalid_argument("generate: row_norm must be positive");

  double decay =
      spec.decay.value_or(solve_decay_for_target_s(spec.target_s, d));
  DenseMatrix dense = draw_rows(n, d, decay, spec.row_norm, spec.seed);

  if (spec.spectrum) {
    const Vector& target = *spec.spectrum;
    if (target.size() != d)
      throw std::invalid_argument("generate: spectrum must have d entries");
    if (n < d)
      throw std::invalid_argument("generate: spectrum shaping needs n >= d");
    if (static_cast<std::int64_t>(n) * d > kDenseOracleLimit)
      throw std::invalid_argument(
          "generate: spectrum shaping only at desk scale");
    for (int j = 0; j < d; ++j)
      if (!(target[j] > 0.0) || (j > 0 && target[j] > target[j - 1]))
        throw std::invalid_argument(
            "generate: spectrum must be positive and descending");
    dense = shape_spectrum(dense, target);

    // Shaping mixes coordinates and drifts the achieved sparsity, usually
    // upward. Recalibrate the profile decay against the shaped measurement
    // (bisection: achieved s is monotone decreasing in the decay) unless the
    // caller pinned the decay explicitly.
    if (!spec.decay) {
      double achieved = mean_sparsity(dense);
      if (std::abs(achieved - spec.target_s) > 0.15 * spec.target_s) {
        double lo = 0.0, hi = 20.0;
        for (int it = 0; it < 12; ++it) {
          decay = 0.5 * (lo + hi);
          dense = shape_spectrum(
              draw_rows(n, d, decay, spec.row_norm, spec.seed), target);
          achieved = mean_sparsity(dense);
          if (std::abs(achieved - spec.target_s) <= 0.15 * spec.target_s)
            break;
          (achieved > spec.target_s ? lo : hi) = decay;
        }
      }
    }
  }
  return from_dense(dense, 0.0);
}

FamilySummary measure_family(const RowMatrix& mat, std::int64_t dense_limit) {
  FamilySummary out;
  out.nnz = mat.nnz();
  int nonzero_rows = 0;
  for (const SparseRow& r : mat.rows()) {
    if (r.empty()) continue;
    out.mean_numerical_sparsity += r.numerical_sparsity;
    ++nonzero_rows;
  }
  if (nonzero_rows > 0) out.mean_numerical_sparsity /= nonzero_rows;
  SpectralStats stats = estimate_spectral(mat, 100, 12345, dense_limit);
  out.stable_rank = stats.stable_rank_est;
  out.kappa = stats.kappa_est;
  out.gap = stats.gap_est;
  return out;
}

}  // namespace nsls
