#include "nsls/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nsls/sampling.hpp"

namespace nsls::oracle {

namespace {

constexpr double kRankTol = 1e-12;

struct LocalSplit {
  std::vector<int> head;  // positions into the row arrays
  std::vector<int> tail;
  double tail_l2_sq = 0.0;
};

// Re-derivation of the head/tail rule: largest magnitudes, ties to the lower
// coordinate index.
LocalSplit local_top_c(const SparseRow& row, int budget) {
  LocalSplit split;
  const int nnz = row.nnz();
  std::vector<int> order(nnz);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(row.values[a]);
    const double mb = std::abs(row.values[b]);
    if (ma != mb) return ma > mb;
    return row.indices[a] < row.indices[b];
  });
  const int h = std::min(budget, nnz);
  split.head.assign(order.begin(), order.begin() + h);
  split.tail.assign(order.begin() + h, order.end());
  for (int p : split.tail) split.tail_l2_sq += row.values[p] * row.values[p];
  return split;
}

long checked_power(long base, int exp, long budget) {
  long out = 1;
  for (int t = 0; t < exp; ++t) {
    if (out > budget / std::max<long>(base, 1)) return budget + 1;
    out *= base;
  }
  return out;
}

[[noreturn]] void refuse(long size, long budget) {
  std::ostringstream os;
  os << "enumeration space " << size << " exceeds budget " << budget;
  throw std::domain_error(os.str());
}

// Mirrors the plan's budget rule so the oracle stays self-contained.
int plan_budget(const SparseRow& row, double k, int dim, bool force_exact) {
  if (force_exact) return row.nnz();
  const int c =
      static_cast<int>(std::ceil(std::sqrt(row.numerical_sparsity) * k));
  return std::clamp(c, 1, dim);
}

}  // namespace

DenseOracle::DenseOracle(const RowMatrix& mat, std::int64_t limit)
    : mat_(&mat) {
  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  if (size > limit)
    throw std::invalid_argument("dense oracle: matrix above desk-scale limit");
  dense_ = mat.densify();
  const int d = mat.n_cols();
  gram_ = DenseMatrix::Zero(d, d);
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(dense_.transpose());
  gram_ = gram_.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(gram_);
  // Ascending from Eigen; store descending.
  eigenvalues_ = eig.eigenvalues().reverse();
  eigvecs_ = eig.eigenvectors().rowwise().reverse();
}

Vector DenseOracle::top_eigenvector() const { return eigvecs_.col(0); }

double DenseOracle::gap() const {
  const int d = static_cast<int>(eigenvalues_.size());
  if (d < 2) return 1.0;
  if (eigenvalues_[0] <= 0.0) return 0.0;
  return (eigenvalues_[0] - eigenvalues_[1]) / eigenvalues_[0];
}

Vector DenseOracle::solve_normal_equations(const Vector& b) const {
  if (lambda_min() <= kRankTol * std::max(lambda1(), 1e-300))
    throw std::runtime_error("dense oracle: Gram matrix singular");
  return least_squares(b);
}

Vector DenseOracle::least_squares(const Vector& b) const {
  const Vector atb = dense_.transpose() * b;
  const Vector proj = eigvecs_.transpose() * atb;
  Vector scaled = Vector::Zero(proj.size());
  const double tol = kRankTol * std::max(lambda1(), 0.0);
  for (int j = 0; j < proj.size(); ++j)
    if (eigenvalues_[j] > tol) scaled[j] = proj[j] / eigenvalues_[j];
  return eigvecs_ * scaled;
}

double DenseOracle::f_star(const Vector& b) const {
  const Vector r = dense_ * least_squares(b) - b;
  return 0.5 * r.squaredNorm();
}

Vector DenseOracle::solve_shifted(double lam, const Vector& rhs) const {
  if (!(lam > lambda1()))
    throw std::runtime_error("dense oracle: shift not above lambda_1");
  const Vector proj = eigvecs_.transpose() * rhs;
  Vector scaled(proj.size());
  for (int j = 0; j < proj.size(); ++j)
    scaled[j] = proj[j] / (lam - eigenvalues_[j]);
  return eigvecs_ * scaled;
}

Vector dense_solve(const RowMatrix& mat, const Vector& b) {
  return DenseOracle(mat).solve_normal_equations(b);
}

std::pair<Vector, Vector> dense_spectrum(const RowMatrix& mat) {
  DenseOracle oracle(mat);
  return {oracle.eigenvalues(), oracle.top_eigenvector()};
}

std::pair<double, double> function_gap(const RowMatrix& mat, const Vector& b,
                                       const Vector& x) {
  DenseOracle oracle(mat);
  const Vector xs = oracle.solve_normal_equations(b);
  const double f = 0.5 * (mat.apply(x) - b).squaredNorm();
  const double fs = 0.5 * (mat.apply(xs) - b).squaredNorm();
  const double anorm = mat.apply(x - xs).squaredNorm();
  return {f - fs, anorm};
}

VectorMoments enumerate_samplevec(const SparseRow& row, int budget, int dim,
                                  long space_budget) {
  VectorMoments out;
  out.mean = Vector::Zero(dim);
  if (budget >= row.nnz()) {  // exact short-circuit
    for (int t = 0; t < row.nnz(); ++t) out.mean[row.indices[t]] = row.values[t];
    out.second_moment = row.l2_norm_sq;
    out.space_size = 1;
    return out;
  }
  const int nnz = row.nnz();
  const long space = checked_power(nnz, budget, space_budget);
  if (space > space_budget) refuse(space, space_budget);
  out.space_size = space;

  std::vector<double> prob(nnz), payload(nnz);
  for (int t = 0; t < nnz; ++t) {
    prob[t] = std::abs(row.values[t]) / row.l1_norm;
    payload[t] = row.values[t] / prob[t];  // a_j / p_j
  }
  std::vector<int> digits(budget, 0);
  Vector outcome = Vector::Zero(dim);
  while (true) {
    double p = 1.0;
    outcome.setZero();
    for (int t = 0; t < budget; ++t) {
      p *= prob[digits[t]];
      outcome[row.indices[digits[t]]] += payload[digits[t]] / budget;
    }
    out.mean += p * outcome;
    out.second_moment += p * outcome.squaredNorm();
    int pos = budget - 1;
    while (pos >= 0 && ++digits[pos] == nnz) digits[pos--] = 0;
    if (pos < 0) break;
  }
  return out;
}

ScalarMoments enumerate_sampledotproduct(const SparseRow& row, int budget,
                                         const Vector& x, long space_budget) {
  ScalarMoments out;
  LocalSplit split = local_top_c(row, budget);
  double head_dot = 0.0;
  for (int p : split.head)
    head_dot += row.values[p] * x[row.indices[p]];
  if (split.tail.empty()) {
    out.mean = head_dot;
    out.second_moment = head_dot * head_dot;
    out.space_size = 1;
    return out;
  }
  const int tn = static_cast<int>(split.tail.size());
  const long space = checked_power(tn, budget, space_budget);
  if (space > space_budget) refuse(space, space_budget);
  out.space_size = space;

  std::vector<double> prob(tn), payload(tn);
  for (int t = 0; t < tn; ++t) {
    const double v = row.values[split.tail[t]];
    prob[t] = v * v / split.tail_l2_sq;
    payload[t] = v * x[row.indices[split.tail[t]]] / prob[t];
  }
  std::vector<int> digits(budget, 0);
  while (true) {
    double p = 1.0;
    double acc = 0.0;
    for (int t = 0; t < budget; ++t) {
      p *= prob[digits[t]];
      acc += payload[digits[t]];
    }
    const double value = head_dot + acc / budget;
    out.mean += p * value;
    out.second_moment += p * value * value;
    int pos = budget - 1;
    while (pos >= 0 && ++digits[pos] == tn) digits[pos--] = 0;
    if (pos < 0) break;
  }
  return out;
}

VectorMoments enumerate_samplerankonemat(const SparseRow& row, int budget,
                                         const Vector& x, long space_budget) {
  // The two stages draw independently, so the joint moments factorize
  // exactly; the budget still gates the joint space size.
  const int dim = static_cast<int>(x.size());
  VectorMoments vec = enumerate_samplevec(row, budget, dim, space_budget);
  ScalarMoments dot = enumerate_sampledotproduct(row, budget, x, space_budget);
  if (vec.space_size > space_budget / std::max<long>(dot.space_size, 1))
    refuse(space_budget + 1, space_budget);
  VectorMoments out;
  out.mean = vec.mean * dot.mean;
  out.second_moment = vec.second_moment * dot.second_moment;
  out.space_size = vec.space_size * dot.space_size;
  return out;
}

VectorMoments enumerate_samplemat(const RowMatrix& mat, double k,
                                  const Vector& x, long space_budget,
                                  bool force_exact) {
  const int d = mat.n_cols();
  double normalizer = 0.0;
  std::vector<double> weight(mat.n_rows(), 0.0);
  std::vector<int> budget(mat.n_rows(), 0);
  for (int i = 0; i < mat.n_rows(); ++i) {
    const SparseRow& r = mat.row(i);
    if (r.empty()) continue;
    budget[i] = plan_budget(r, k, d, force_exact);
    weight[i] = r.l2_norm_sq * (1.0 + r.numerical_sparsity / budget[i]);
    normalizer += weight[i];
  }
  if (normalizer <= 0.0)
    throw std::invalid_argument("enumerate_samplemat: zero matrix");

  VectorMoments out;
  out.mean = Vector::Zero(d);
  for (int i = 0; i < mat.n_rows(); ++i) {
    if (weight[i] == 0.0) continue;
    const double p = weight[i] / normalizer;
    VectorMoments r1 = enumerate_samplerankonemat(
        mat.row(i), budget[i], x, space_budget - out.space_size);
    out.mean += r1.mean;                      // p * (1/p) * mean_i
    out.second_moment += r1.second_moment / p;
    out.space_size += r1.space_size;
    if (out.space_size > space_budget) refuse(out.space_size, space_budget);
  }
  return out;
}

double bound_samplevec(const SparseRow& row, int budget) {
  return row.l2_norm_sq * (1.0 + row.numerical_sparsity / budget);
}

double bound_sampledotproduct(const SparseRow& row, int budget,
                              const Vector& x) {
  LocalSplit split = local_top_c(row, budget);
  double dot = row.dot(x);
  return dot * dot + split.tail_l2_sq * x.squaredNorm() / budget;
}

double bound_samplerankonemat(const SparseRow& row, int budget,
                              const Vector& x) {
  const double s = row.numerical_sparsity;
  const double dot = row.dot(x);
  return row.l2_norm_sq * (1.0 + s / budget) *
         (dot * dot + s / (static_cast<double>(budget) * budget) *
                          row.l2_norm_sq * x.squaredNorm());
}

double bound_samplemat(const RowMatrix& mat, double k, const Vector& x,
                       bool force_exact) {
  const int d = mat.n_cols();
  double normalizer = 0.0;
  for (const SparseRow& r : mat.rows()) {
    if (r.empty()) continue;
    const int c = plan_budget(r, k, d, force_exact);
    normalizer += r.l2_norm_sq * (1.0 + r.numerical_sparsity / c);
  }
  return normalizer * (mat.apply(x).squaredNorm() +
                       mat.frobenius_sq() * x.squaredNorm() / (k * k));
}

MomentReport monte_carlo_moments(
    const std::function<void(Rng&, Vector&)>& estimator, const Vector& target,
    double bound, long draws, Rng rng) {
  if (draws < 10000)
    throw std::invalid_argument("monte carlo: need at least 1e4 draws");
  MomentReport report;
  report.draws = draws;
  report.bound = bound;

  constexpr int kChunks = 8;
  struct Chunk {
    Vector sum;
    double sum_q = 0.0;
    double sum_q2 = 0.0;
  };
  auto run_chunk = [&](int c) {
    Chunk acc;
    acc.sum = Vector::Zero(target.size());
    Rng stream = rng.split(1000 + c);
    Vector draw(target.size());
    const long lo = draws * c / kChunks;
    const long hi = draws * (c + 1) / kChunks;
    for (long t = lo; t < hi; ++t) {
      estimator(stream, draw);
      acc.sum += draw;
      const double q = draw.squaredNorm();
      acc.sum_q += q;
      acc.sum_q2 += q * q;
    }
    return acc;
  };
  std::vector<std::future<Chunk>> futures;
  futures.reserve(kChunks);
  for (int c = 0; c < kChunks; ++c)
    futures.push_back(std::async(std::launch::async, run_chunk, c));
  Vector sum = Vector::Zero(target.size());
  double sum_q = 0.0, sum_q2 = 0.0;
  for (auto& f : futures) {  // fixed combination order keeps this deterministic
    Chunk c = f.get();
    sum += c.sum;
    sum_q += c.sum_q;
    sum_q2 += c.sum_q2;
  }

  const double n = static_cast<double>(draws);
  const Vector mean = sum / n;
  report.second_moment = sum_q / n;
  const double var_q =
      std::max(0.0, sum_q2 / n - report.second_moment * report.second_moment);
  report.stderr_sm = std::sqrt(var_q / n);
  report.mean_err = (mean - target).norm();
  const double mean_var =
      std::max(0.0, report.second_moment - mean.squaredNorm());
  report.mean_err_scale =
      3.0 * std::sqrt(mean_var / n) + 1e-9 * (1.0 + target.norm());
  report.mean_ok = report.mean_err <= report.mean_err_scale;
  report.second_ok =
      report.second_moment <= bound * (1.0 + 1e-12) + 3.0 * report.stderr_sm;
  return report;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::vector<PropertyCheck> verify_matrix(const RowMatrix& mat, double k,
                                      const VerifyOptions& opts) {
  std::vector<PropertyCheck> checks;
  const int d = mat.n_cols();
  Rng rng(opts.seed);

  // Tail mass bound for every row and budget.
  {
    PropertyCheck check;
    check.property = "numerical-sparsity";
    double worst = 0.0;
    for (const SparseRow& row : mat.rows()) {
      if (row.empty()) continue;
      std::vector<double> mags(row.values.size());
      for (std::size_t t = 0; t < row.values.size(); ++t)
        mags[t] = std::abs(row.values[t]);
      std::sort(mags.begin(), mags.end(), std::greater<>());
      double suffix = 0.0;
      std::vector<double> tail_sq(mags.size() + 1, 0.0);
      for (int t = static_cast<int>(mags.size()) - 1; t >= 0; --t) {
        suffix += mags[t] * mags[t];
        tail_sq[t] = suffix;
      }
      for (int c = 1; c <= d; ++c) {
        const double tail =
            c < static_cast<int>(mags.size()) ? tail_sq[c] : 0.0;
        const double allowed =
            row.l2_norm_sq * row.numerical_sparsity / c;
        if (allowed > 0.0) worst = std::max(worst, tail / allowed);
      }
    }
    check.measured = worst;
    check.bound = 1.0;
    check.pass = worst <= 1.0 + 1e-12;
    check.detail = "max tail/(s/c * l2^2) ratio over rows and budgets";
    checks.push_back(check);
  }

  // Probe vector and rows for the estimator checks.
  Vector x(d);
  for (int j = 0; j < d; ++j) x[j] = rng.next_gaussian();
  std::vector<int> probe_rows;
  {
    int best_s = -1, worst_s = -1;
    for (int i = 0; i < mat.n_rows(); ++i) {
      if (mat.row(i).empty()) continue;
      if (best_s < 0 ||
          mat.row(i).numerical_sparsity > mat.row(best_s).numerical_sparsity)
        best_s = i;
      if (worst_s < 0 ||
          mat.row(i).numerical_sparsity < mat.row(worst_s).numerical_sparsity)
        worst_s = i;
    }
    if (best_s >= 0) probe_rows.push_back(best_s);
    if (worst_s >= 0 && worst_s != best_s) probe_rows.push_back(worst_s);
  }
  if (probe_rows.empty())
    throw std::invalid_argument("verify: matrix has no nonzero rows");

  SamplingPlan plan = make_sampling_plan(mat, k);
  std::vector<RowSampler> samplers = make_row_samplers(mat, plan);
  const double bias = opts.bias;

  auto summarize = [](const MomentReport& mc, bool enum_ok,
                      PropertyCheck& check) {
    check.pass = mc.pass() && enum_ok;
    check.measured = mc.second_moment;
    check.bound = mc.bound;
    check.detail = "mc mean_err=" + fmt(mc.mean_err) +
                   " second=" + fmt(mc.second_moment) +
                   " bound=" + fmt(mc.bound) + (enum_ok ? "" : " enum=FAIL");
  };

  for (int i : probe_rows) {
    const SparseRow& row = mat.row(i);
    const RowSampler& sampler = samplers[i];
    const int c = plan.budgets[i];

    {  // Samplevec
      PropertyCheck check;
      check.property = "stochastic-approx-of-a(row " + std::to_string(i) + ")";
      bool enum_ok = true;
      Vector target = Vector::Zero(d);
      row.add_to(target, 1.0);
      try {
        VectorMoments em = enumerate_samplevec(row, c, d, opts.enum_budget);
        enum_ok = (em.mean - target).norm() <= 1e-10 * (1.0 + target.norm()) &&
                  em.second_moment <=
                      bound_samplevec(row, c) * (1.0 + 1e-12);
      } catch (const std::domain_error&) {
      }
      auto est = [&](Rng& r, Vector& out) {
        out.setZero();
        GradientEstimate g = samplevec_draw(sampler, r);
        for (const auto& p : g.coords) out[p.first] += bias * p.second;
      };
      MomentReport mc = monte_carlo_moments(est, target, bound_samplevec(row, c),
                                            opts.draws, rng.split(10 + i));
      summarize(mc, enum_ok, check);
      checks.push_back(check);
    }

    {  // Sampledotproduct
      PropertyCheck check;
      check.property = "stochastic-approx-of-aTx(row " + std::to_string(i) + ")";
      bool enum_ok = true;
      Vector target(1);
      target[0] = row.dot(x);
      try {
        ScalarMoments em =
            enumerate_sampledotproduct(row, c, x, opts.enum_budget);
        enum_ok = std::abs(em.mean - target[0]) <=
                      1e-10 * (1.0 + std::abs(target[0])) &&
                  em.second_moment <=
                      bound_sampledotproduct(row, c, x) * (1.0 + 1e-12);
      } catch (const std::domain_error&) {
      }
      auto est = [&](Rng& r, Vector& out) {
        long touches = 0;
        out[0] = bias * sampledotproduct(
                            sampler, [&](int j) { return x[j]; }, r, &touches);
      };
      MomentReport mc =
          monte_carlo_moments(est, target, bound_sampledotproduct(row, c, x),
                              opts.draws, rng.split(20 + i));
      summarize(mc, enum_ok, check);
      checks.push_back(check);
    }

    {  // Samplerankonemat
      PropertyCheck check;
      check.property = "stochastic-approx-of-aaTx(row " + std::to_string(i) + ")";
      bool enum_ok = true;
      Vector target = Vector::Zero(d);
      row.add_to(target, row.dot(x));
      try {
        VectorMoments em =
            enumerate_samplerankonemat(row, c, x, opts.enum_budget);
        enum_ok = (em.mean - target).norm() <= 1e-10 * (1.0 + target.norm()) &&
                  em.second_moment <=
                      bound_samplerankonemat(row, c, x) * (1.0 + 1e-12);
      } catch (const std::domain_error&) {
      }
      auto est = [&](Rng& r, Vector& out) {
        out.setZero();
        GradientEstimate g = samplerankonemat_draw(sampler, x, r);
        for (const auto& p : g.coords) out[p.first] += bias * p.second;
      };
      MomentReport mc =
          monte_carlo_moments(est, target, bound_samplerankonemat(row, c, x),
                              opts.draws, rng.split(30 + i));
      summarize(mc, enum_ok, check);
      checks.push_back(check);
    }
  }

  {  // Samplemat over the whole matrix
    PropertyCheck check;
    check.property = "stochastic-approx-of-ATAx";
    bool enum_ok = true;
    Vector target = mat.gram_apply(x);
    try {
      VectorMoments em = enumerate_samplemat(mat, k, x, opts.enum_budget);
      enum_ok = (em.mean - target).norm() <= 1e-10 * (1.0 + target.norm()) &&
                em.second_moment <=
                    bound_samplemat(mat, k, x) * (1.0 + 1e-12);
    } catch (const std::domain_error&) {
    }
    auto est = [&](Rng& r, Vector& out) {
      out.setZero();
      GradientEstimate g = samplemat_draw(plan, samplers, x, r);
      for (const auto& p : g.coords) out[p.first] += bias * p.second;
    };
    MomentReport mc = monte_carlo_moments(est, target, bound_samplemat(mat, k, x),
                                          opts.draws, rng.split(40));
    summarize(mc, enum_ok, check);
    checks.push_back(check);
  }
  return checks;
}

}  // namespace nsls::oracle
