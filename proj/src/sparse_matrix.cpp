#include "nsls/sparse_matrix.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nsls/rng.hpp"

namespace nsls {

namespace {

constexpr double kStatTol = 1e-12;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

double SparseRow::dot(const Vector& x) const {
  double acc = 0.0;
  for (std::size_t t = 0; t < indices.size(); ++t) acc += values[t] * x[indices[t]];
  return acc;
}

void SparseRow::add_to(Vector& y, double scale) const {
  for (std::size_t t = 0; t < indices.size(); ++t) y[indices[t]] += scale * values[t];
}

SparseRow make_row(const std::vector<int>& indices,
                   const std::vector<double>& values) {
  if (indices.size() != values.size()) fail("row: index/value length mismatch");
  SparseRow r;
  r.indices = indices;
  r.values = values;
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (t > 0 && indices[t] <= indices[t - 1])
      fail("row: indices must be strictly increasing");
    if (values[t] == 0.0) fail("row: explicit zero value");
    if (!std::isfinite(values[t])) fail("row: non-finite value");
    r.l1_norm += std::abs(values[t]);
    r.l2_norm_sq += values[t] * values[t];
  }
  r.numerical_sparsity =
      r.empty() ? 0.0 : (r.l1_norm * r.l1_norm) / r.l2_norm_sq;
  return r;
}

RowMatrix::RowMatrix(int n_rows, int n_cols, std::vector<SparseRow> rows)
    : n_rows_(n_rows), n_cols_(n_cols), rows_(std::move(rows)) {
  if (n_rows < 0 || n_cols < 0) fail("matrix: negative dimension");
  if (static_cast<int>(rows_.size()) != n_rows)
    fail("matrix: row count mismatch");
  for (const SparseRow& r : rows_) {
    if (!r.empty() && r.indices.back() >= n_cols)
      fail("matrix: column index out of range");
    // Re-derive the statistics so externally built rows cannot drift.
    double l1 = 0.0, l2 = 0.0;
    for (double v : r.values) {
      l1 += std::abs(v);
      l2 += v * v;
    }
    if (std::abs(l1 - r.l1_norm) > kStatTol * std::max(1.0, l1) ||
        std::abs(l2 - r.l2_norm_sq) > kStatTol * std::max(1.0, l2))
      fail("matrix: row norms inconsistent");
    frobenius_sq_ += r.l2_norm_sq;
    row_l2_sq_max_ = std::max(row_l2_sq_max_, r.l2_norm_sq);
    nnz_ += r.nnz();
  }
}

Vector RowMatrix::gram_apply(const Vector& x) const {
  Vector y = Vector::Zero(n_cols_);
  for (const SparseRow& r : rows_) {
    if (r.empty()) continue;
    r.add_to(y, r.dot(x));
  }
  return y;
}

Vector RowMatrix::residual_gradient(const Vector& x, const Vector& b) const {
  Vector y = Vector::Zero(n_cols_);
  for (int i = 0; i < n_rows_; ++i) {
    const SparseRow& r = rows_[i];
    if (r.empty()) continue;
    r.add_to(y, r.dot(x) - b[i]);
  }
  return y;
}

Vector RowMatrix::apply(const Vector& x) const {
  Vector y(n_rows_);
  for (int i = 0; i < n_rows_; ++i) y[i] = rows_[i].dot(x);
  return y;
}

DenseMatrix RowMatrix::densify() const {
  DenseMatrix out = DenseMatrix::Zero(n_rows_, n_cols_);
  for (int i = 0; i < n_rows_; ++i) {
    const SparseRow& r = rows_[i];
    for (std::size_t t = 0; t < r.indices.size(); ++t)
      out(i, r.indices[t]) = r.values[t];
  }
  return out;
}

RowMatrix from_dense(const DenseMatrix& values, double drop_tol) {
  if (drop_tol < 0.0) fail("from_dense: drop_tol must be nonnegative");
  const int n = static_cast<int>(values.rows());
  const int d = static_cast<int>(values.cols());
  std::vector<SparseRow> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> idx;
    std::vector<double> val;
    for (int j = 0; j < d; ++j) {
      const double v = values(i, j);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "from_dense: non-finite entry at (" << i << ", " << j << ")";
        fail(os.str());
      }
      if (std::abs(v) <= drop_tol) continue;
      idx.push_back(j);
      val.push_back(v);
    }
    rows.push_back(make_row(idx, val));
  }
  return RowMatrix(n, d, std::move(rows));
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  std::ostringstream os;
  os << path << ":" << line << ": " << what;
  throw std::runtime_error(os.str());
}

}  // namespace

RowMatrix load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  ++lineno;
  std::istringstream hdr(line);
  std::string banner, object, format, field, symmetry;
  hdr >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || object != "matrix")
    parse_fail(path, lineno, "not a MatrixMarket matrix header");
  const bool coordinate = format == "coordinate";
  if (!coordinate && format != "array")
    parse_fail(path, lineno, "unsupported format '" + format + "'");
  if (field != "real")
    parse_fail(path, lineno, "only real matrices are supported");
  if (symmetry != "general")
    parse_fail(path, lineno, "only general symmetry is supported");

  auto next_data_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos) continue;
      if (line[pos] == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_data_line()) parse_fail(path, lineno, "missing size line");
  std::istringstream sz(line);
  long n = 0, d = 0, entries = 0;
  if (coordinate) {
    if (!(sz >> n >> d >> entries))
      parse_fail(path, lineno, "bad coordinate size line");
  } else {
    if (!(sz >> n >> d)) parse_fail(path, lineno, "bad array size line");
    entries = n * d;
  }
  if (n < 0 || d < 0 || entries < 0)
    parse_fail(path, lineno, "negative dimensions");

  DenseMatrix dense = DenseMatrix::Zero(n, d);
  if (coordinate) {
    for (long e = 0; e < entries; ++e) {
      if (!next_data_line())
        parse_fail(path, lineno, "unexpected end of file in entry list");
      std::istringstream es(line);
      long i = 0, j = 0;
      double v = 0.0;
      if (!(es >> i >> j >> v)) parse_fail(path, lineno, "bad entry line");
      if (i < 1 || i > n || j < 1 || j > d)
        parse_fail(path, lineno, "entry index out of range");
      dense(i - 1, j - 1) += v;  // duplicates are summed
    }
  } else {
    // Array format lists entries in column-major order.
    for (long j = 0; j < d; ++j) {
      for (long i = 0; i < n; ++i) {
        if (!next_data_line())
          parse_fail(path, lineno, "unexpected end of file in array data");
        std::istringstream es(line);
        double v = 0.0;
        if (!(es >> v)) parse_fail(path, lineno, "bad array value");
        dense(i, j) = v;
      }
    }
  }
  if (next_data_line()) parse_fail(path, lineno, "trailing data");
  return from_dense(dense, 0.0);
}

void save_matrix_market(const RowMatrix& mat, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << mat.n_rows() << " " << mat.n_cols() << " " << mat.nnz() << "\n";
  char buf[64];
  for (int i = 0; i < mat.n_rows(); ++i) {
    const SparseRow& r = mat.row(i);
    for (std::size_t t = 0; t < r.indices.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.values[t]);
      out << (i + 1) << " " << (r.indices[t] + 1) << " " << buf << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failure on " + path);
}

SpectralStats estimate_spectral(const RowMatrix& mat, int power_iters,
                                std::uint64_t seed, std::int64_t dense_limit) {
  if (power_iters < 1) fail("estimate_spectral: power_iters must be >= 1");
  if (mat.frobenius_sq() == 0.0)
    throw std::runtime_error("spectrum undefined for zero matrix");
  const int d = mat.n_cols();
  SpectralStats stats;

  Rng rng(seed);
  Vector x(d);
  for (int j = 0; j < d; ++j) x[j] = rng.next_gaussian();
  x.normalize();
  double rq = 0.0;
  for (int it = 0; it < power_iters; ++it) {
    Vector y = mat.gram_apply(x);
    const double norm = y.norm();
    if (norm == 0.0) {
      // Landed in the kernel; restart from a fresh direction.
      for (int j = 0; j < d; ++j) x[j] = rng.next_gaussian();
      x.normalize();
      continue;
    }
    x = y / norm;
    rq = x.dot(mat.gram_apply(x));
  }
  stats.lambda1_est = rq;

  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  if (size <= dense_limit) {
    DenseMatrix gram = DenseMatrix::Zero(d, d);
    DenseMatrix dense = mat.densify();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(dense.transpose());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(
        gram.selfadjointView<Eigen::Lower>());
    const Vector& ev = eig.eigenvalues();  // ascending
    const double lam1 = ev[d - 1];
    const double lam2 = d >= 2 ? ev[d - 2] : lam1;
    stats.lambda1_est = lam1;
    stats.mu_est = std::max(0.0, ev[0]);
    // Clamp tiny negatives from roundoff; report exact zero as singular.
    if (stats.mu_est < 1e-13 * std::max(1.0, lam1)) stats.mu_est = 0.0;
    stats.gap_est = lam1 > 0.0 ? (lam1 - lam2) / lam1 : 0.0;
    stats.dense_path = true;
  }
  stats.stable_rank_est =
      stats.lambda1_est > 0.0 ? mat.frobenius_sq() / stats.lambda1_est : 0.0;
  stats.kappa_est = stats.mu_est > 0.0
                        ? mat.frobenius_sq() / stats.mu_est
                        : std::numeric_limits<double>::infinity();
  return stats;
}

std::pair<RowMatrix, Vector> augment_ridge(const RowMatrix& mat,
                                           const Vector& b, double lam,
                                           const Vector& x0) {
  if (lam <= 0.0) fail("augment_ridge: lam must be positive");
  if (b.size() != mat.n_rows()) fail("augment_ridge: b size mismatch");
  if (x0.size() != mat.n_cols()) fail("augment_ridge: x0 size mismatch");
  const int n = mat.n_rows();
  const int d = mat.n_cols();
  const double root = std::sqrt(lam);
  std::vector<SparseRow> rows = mat.rows();
  rows.reserve(n + d);
  for (int j = 0; j < d; ++j) rows.push_back(make_row({j}, {root}));
  Vector bt(n + d);
  bt.head(n) = b;
  bt.tail(d) = root * x0;
  return {RowMatrix(n + d, d, std::move(rows)), std::move(bt)};
}

}  // namespace nsls
