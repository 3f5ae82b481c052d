#include "nsls/regression.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "nsls/oracle.hpp"
#include "nsls/sampling.hpp"

namespace nsls {

namespace {

double objective(const RowMatrix& mat, const Vector& b, const Vector& x) {
  return 0.5 * (mat.apply(x) - b).squaredNorm();
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

// Exact function-gap metric when the dense oracle is affordable, otherwise
// the PL surrogate ||grad f||^2 / (2 mu), which upper-bounds the gap.
struct GapMetric {
  const RowMatrix* mat;
  const Vector* b;
  double mu;
  std::optional<double> f_star;  // set on the oracle path
  double floor = 0.0;

  double operator()(const Vector& x) const {
    if (f_star) {
      const double gap = objective(*mat, *b, x) - *f_star;
      return gap <= floor ? 0.0 : gap;
    }
    const double g = mat->residual_gradient(x, *b).squaredNorm() / (2.0 * mu);
    return g <= floor ? 0.0 : g;
  }
};

GapMetric make_gap_metric(const RowMatrix& mat, const Vector& b, double mu,
                          std::int64_t dense_limit, SolveReport* report) {
  GapMetric metric{&mat, &b, mu, std::nullopt, 0.0};
  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  if (size <= dense_limit) {
    oracle::DenseOracle dense(mat, dense_limit);
    metric.f_star = dense.f_star(b);
    metric.floor = 1e-13 * (1.0 + std::abs(*metric.f_star));
  } else if (report) {
    report->warn("stopping metric: gradient-norm surrogate (above dense limit)");
  }
  return metric;
}

struct CoreResult {
  Vector x;
  ConvergenceTrace trace;
};

// One SVRG solve of min 0.5||Ax-b||^2 down to a function-gap ratio.
CoreResult solve_core(const RowMatrix& mat, const SamplingPlan& plan,
                      const std::vector<RowSampler>& samplers, const Vector& b,
                      double mu, const Vector& x_init, double fgap_ratio,
                      int max_epochs, const SvrgOverrides& overrides,
                      const std::function<double(const Vector&)>& metric,
                      Rng rng) {
  SvrgProblem problem;
  problem.sigma_sq = plan.sigma_sq;
  problem.mu = mu;
  problem.error_metric = metric;
  problem.overrides = overrides;
  problem.oracles.lambda_shift = 0.0;
  problem.oracles.full_gradient_cost = mat.nnz();
  problem.oracles.grad_full = [&mat, &b](const Vector& x) {
    return mat.residual_gradient(x, b);
  };
  auto scratch = std::make_shared<EstimateScratch>();
  problem.oracles.grad_diff = [&mat, &plan, &samplers, scratch](
                                  const ImplicitIterate& it, Rng& r,
                                  GradientEstimate& out) {
    samplemat_diff(
        plan, samplers, [&](int j) { return it.coord(j); },
        [&](int j) { return it.anchor()[j]; }, r, *scratch, out);
  };
  auto [x, trace] =
      solve_constant_factor(problem, x_init, fgap_ratio, max_epochs, rng);
  return {std::move(x), std::move(trace)};
}

void fill_report_from_trace(SolveReport& report, const ConvergenceTrace& trace) {
  report.converged = trace.converged;
  report.epochs += trace.epochs;
  report.inner_steps += trace.inner_steps;
  report.coordinate_touches += trace.touches;
  report.full_gradient_evals += trace.full_gradient_evals;
  for (double r : trace.residuals) report.residual_trace.push_back(r);
  if (!trace.note.empty()) report.warn(trace.note);
}

// Final quality numbers measured against the dense oracle when affordable.
void fill_final_metrics(const RowMatrix& mat, const Vector& b,
                        const Vector& x_init, const Vector& x,
                        std::int64_t dense_limit, SolveReport& report) {
  report.final_metric_name = "ata_norm_ratio";
  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  report.metrics["residual_norm"] = (mat.apply(x) - b).norm();
  if (size > dense_limit) {
    report.final_metric_value = -1.0;
    report.warn("final ata_norm_ratio unavailable above dense limit");
    return;
  }
  oracle::DenseOracle dense(mat, dense_limit);
  const Vector xs = dense.least_squares(b);
  const double init_norm = mat.apply(x_init - xs).norm();
  const double final_norm = mat.apply(x - xs).norm();
  report.final_metric_value = init_norm > 0.0 ? final_norm / init_norm : 0.0;
  report.metrics["l2_error_ratio"] =
      (x_init - xs).norm() > 0.0 ? (x - xs).norm() / (x_init - xs).norm() : 0.0;
}

void validate(const RegressionProblem& prob, const RegressionConfig& cfg) {
  if (prob.mat == nullptr) throw std::invalid_argument("regression: no matrix");
  if (prob.b.size() != prob.mat->n_rows())
    throw std::invalid_argument("regression: b size mismatch");
  if (!(prob.mu > 0.0))
    throw std::invalid_argument(
        "regression: mu must be positive (not strongly convex)");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    throw std::invalid_argument("regression: epsilon must lie in (0,1)");
}

}  // namespace

std::pair<Vector, SolveReport> solve_regression(const RegressionProblem& prob,
                                                const RegressionConfig& cfg) {
  validate(prob, cfg);
  Stopwatch watch;
  const RowMatrix& mat = *prob.mat;
  SolveReport report;

  const double kappa = mat.frobenius_sq() / prob.mu;
  const double d = mat.n_cols();
  const bool exact_fallback = kappa > d * d;
  if (exact_fallback)
    report.warn("kappa > d^2: coordinate-sampling variance analysis does not "
                "apply, falling back to exact-row sampling");
  const double k = cfg.k_override.value_or(std::sqrt(kappa));
  SamplingPlan plan = make_sampling_plan(mat, k, exact_fallback);
  plan.sigma_sq = plan.normalizer;  // sigma^2 = M
  std::vector<RowSampler> samplers = make_row_samplers(mat, plan);

  Vector x_init =
      prob.x_init.size() == mat.n_cols() ? prob.x_init : Vector::Zero(mat.n_cols());
  GapMetric metric = make_gap_metric(mat, prob.b, prob.mu, cfg.dense_limit, &report);

  // epsilon is an A^T A norm ratio; the function gap is its square.
  const double fgap_ratio = cfg.epsilon * cfg.epsilon;
  const int max_epochs =
      cfg.max_epochs > 0
          ? cfg.max_epochs
          : static_cast<int>(std::ceil(std::log2(1.0 / fgap_ratio))) * 3 + 20;

  CoreResult res = solve_core(mat, plan, samplers, prob.b, prob.mu, x_init,
                              fgap_ratio, max_epochs, cfg.svrg, metric,
                              Rng(cfg.seed));
  fill_report_from_trace(report, res.trace);
  fill_final_metrics(mat, prob.b, x_init, res.x, cfg.dense_limit, report);
  report.metrics["sigma_sq"] = plan.sigma_sq;
  report.metrics["kappa"] = kappa;
  report.wall_time_ms = watch.ms();
  return {std::move(res.x), std::move(report)};
}

std::pair<Vector, SolveReport> solve_regression_accelerated(
    const RegressionProblem& prob, const RegressionConfig& cfg) {
  validate(prob, cfg);
  Stopwatch watch;
  const RowMatrix& mat = *prob.mat;
  const double mu = prob.mu;
  SolveReport report;

  // Balancing value from the accelerated-runtime analysis.
  double sum_norm_sqrt_s = 0.0;
  for (const SparseRow& r : mat.rows())
    sum_norm_sqrt_s += r.l2_norm_sq * std::sqrt(r.numerical_sparsity);
  const double lam_balancing = std::pow(
      std::sqrt(mat.frobenius_sq()) / static_cast<double>(mat.nnz()) *
          sum_norm_sqrt_s,
      2.0 / 3.0);
  double lam = lam_balancing;
  const double lam_cap = std::sqrt(mat.frobenius_sq() / mat.n_cols());
  if (lam > lam_cap) {
    report.warn("accel: balancing lam clamped to sqrt(||A||_F^2/d)");
    lam = lam_cap;
  }
  if (cfg.accel.lam_override) lam = *cfg.accel.lam_override;
  if (lam < 2.0 * mu) {
    report.warn("accel: lam < 2 mu, acceleration not beneficial; "
                "falling back to unaccelerated");
    RegressionConfig plain = cfg;
    plain.accel.enabled = false;
    auto [x, inner] = solve_regression(prob, plain);
    inner.clamps_and_warnings.insert(inner.clamps_and_warnings.begin(),
                                     report.clamps_and_warnings.begin(),
                                     report.clamps_and_warnings.end());
    inner.metrics["accel_lam_balancing"] = lam_balancing;
    return {std::move(x), std::move(inner)};
  }

  Vector x_init =
      prob.x_init.size() == mat.n_cols() ? prob.x_init : Vector::Zero(mat.n_cols());
  GapMetric outer_metric =
      make_gap_metric(mat, prob.b, mu, cfg.dense_limit, &report);

  // The proximal subproblem matrix (A with sqrt(lam) e_j rows appended) is
  // fixed; only the augmented right-hand side moves with the prox center.
  auto [aug_mat, aug_b0] = augment_ridge(mat, prob.b, lam, x_init);
  const double mu_sub = mu + lam;
  const double kappa_sub = aug_mat.frobenius_sq() / mu_sub;
  const bool sub_exact = kappa_sub > static_cast<double>(mat.n_cols()) *
                                         static_cast<double>(mat.n_cols());
  SamplingPlan sub_plan =
      make_sampling_plan(aug_mat, std::sqrt(kappa_sub), sub_exact);
  sub_plan.sigma_sq = sub_plan.normalizer;
  std::vector<RowSampler> sub_samplers = make_row_samplers(aug_mat, sub_plan);

  // Subproblem gap metric through the cached ridge factorization:
  // min 0.5||Ax-b||^2 + lam/2 ||x-y||^2 has optimum (A^T A + lam I)^{-1}
  // (A^T b + lam y).
  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  const bool oracle_metric = size <= cfg.dense_limit;
  Eigen::LDLT<DenseMatrix> ridge_ldlt;
  Vector atb = Vector::Zero(mat.n_cols());
  if (oracle_metric) {
    DenseMatrix dense = mat.densify();
    DenseMatrix gram = dense.transpose() * dense;
    gram.diagonal().array() += lam;
    ridge_ldlt.compute(gram);
    atb = mat.residual_gradient(Vector::Zero(mat.n_cols()), prob.b) * -1.0;
  }

  // Framework contract: each subproblem is solved to relative accuracy 1/c.
  const double c_req = 4.0 * std::pow((2.0 * lam + mu) / mu, 1.5);
  const double sub_ratio = 1.0 / c_req;
  const int sub_epochs =
      static_cast<int>(std::ceil(std::log2(c_req))) * 3 + 12;

  const double q = mu / (mu + lam);
  double alpha = std::sqrt(q);
  Vector x = x_init;
  Vector x_prev = x_init;
  Vector y = x_init;

  const double e0 = outer_metric(x_init);
  const double fgap_target = cfg.epsilon * cfg.epsilon;
  bool converged = e0 <= 0.0;
  const int max_outer =
      cfg.max_epochs > 0
          ? cfg.max_epochs
          : static_cast<int>(std::ceil(std::sqrt(lam / mu) *
                                       std::log(1.0 / fgap_target) * 2.0)) +
                20;
  Rng rng(cfg.seed);
  int outer = 0;
  for (; outer < max_outer && !converged; ++outer) {
    Vector aug_b = aug_b0;
    aug_b.tail(mat.n_cols()) = std::sqrt(lam) * y;

    std::function<double(const Vector&)> sub_metric;
    if (oracle_metric) {
      const Vector rhs = atb + lam * y;
      const Vector x_star = ridge_ldlt.solve(rhs);
      const double f_star = 0.5 * (aug_mat.apply(x_star) - aug_b).squaredNorm();
      const double floor = 1e-13 * (1.0 + std::abs(f_star));
      sub_metric = [&aug_mat, aug_b, f_star, floor](const Vector& v) {
        const double gap =
            0.5 * (aug_mat.apply(v) - aug_b).squaredNorm() - f_star;
        return gap <= floor ? 0.0 : gap;
      };
    } else {
      sub_metric = [&aug_mat, aug_b, mu_sub](const Vector& v) {
        return aug_mat.residual_gradient(v, aug_b).squaredNorm() /
               (2.0 * mu_sub);
      };
    }

    CoreResult sub = solve_core(aug_mat, sub_plan, sub_samplers, aug_b, mu_sub,
                                y, sub_ratio, sub_epochs, cfg.svrg, sub_metric,
                                rng.split(outer));
    fill_report_from_trace(report, sub.trace);
    report.converged = false;  // only the outer criterion decides

    x_prev = std::move(x);
    x = std::move(sub.x);
    const double err = outer_metric(x);
    report.residual_trace.push_back(err);
    if (err <= fgap_target * e0) {
      converged = true;
      break;
    }
    // Catalyst momentum recursion.
    const double rhs_term = q - alpha * alpha;
    const double alpha_next =
        0.5 * (rhs_term + std::sqrt(rhs_term * rhs_term + 4.0 * alpha * alpha));
    const double beta =
        alpha * (1.0 - alpha) / (alpha * alpha + alpha_next);
    y = x + beta * (x - x_prev);
    alpha = alpha_next;
  }

  report.converged = converged;
  report.metrics["accel_lam"] = lam;
  report.metrics["accel_lam_balancing"] = lam_balancing;
  report.metrics["outer_iterations"] = outer + (converged ? 1 : 0);
  fill_final_metrics(mat, prob.b, x_init, x, cfg.dense_limit, report);
  report.wall_time_ms = watch.ms();
  return {std::move(x), std::move(report)};
}

double mu_search(const RowMatrix& mat, const Vector& b,
                 const MuSearchOptions& opts) {
  const double mu_hi = opts.mu_hi > 0.0 ? opts.mu_hi : mat.frobenius_sq();
  const double mu_lo = mu_hi * opts.mu_lo_factor;
  Rng rng(opts.seed);

  // Probe start, floor and gap metric shared by all candidates.
  Vector x0(mat.n_cols());
  for (int j = 0; j < mat.n_cols(); ++j) x0[j] = rng.next_gaussian();
  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  std::optional<double> f_star;
  if (size <= kDenseOracleLimit) {
    oracle::DenseOracle dense(mat);
    if (dense.lambda_min() <= 1e-10 * std::max(dense.lambda1(), 1e-300))
      throw std::runtime_error("mu_search: matrix appears singular");
    f_star = dense.f_star(b);
  }
  const double floor =
      f_star ? 1e-12 * (1.0 + std::abs(*f_star)) : 0.0;
  auto metric = [&](const Vector& x) {
    if (f_star) return std::max(0.0, objective(mat, b, x) - *f_star);
    return mat.residual_gradient(x, b).squaredNorm();
  };

  int candidate = 0;
  for (double mu = mu_hi; mu >= mu_lo; mu *= 0.5, ++candidate) {
    const double kappa = mat.frobenius_sq() / mu;
    const bool exact = kappa > static_cast<double>(mat.n_cols()) *
                                   static_cast<double>(mat.n_cols());
    SamplingPlan plan = make_sampling_plan(mat, std::sqrt(kappa), exact);
    plan.sigma_sq = plan.normalizer;
    if (64.0 * plan.sigma_sq / mu > static_cast<double>(opts.probe_step_cap))
      break;  // probes below this are unaffordable; treat as not accepted

    SvrgParams params = derive_params(plan.sigma_sq, mu);
    std::vector<RowSampler> samplers = make_row_samplers(mat, plan);
    EpochOracles oracles;
    oracles.lambda_shift = 0.0;
    oracles.full_gradient_cost = mat.nnz();
    oracles.grad_full = [&mat, &b](const Vector& x) {
      return mat.residual_gradient(x, b);
    };
    EstimateScratch scratch;
    oracles.grad_diff = [&plan, &samplers, &scratch](const ImplicitIterate& it,
                                                     Rng& r,
                                                     GradientEstimate& out) {
      samplemat_diff(
          plan, samplers, [&](int j) { return it.coord(j); },
          [&](int j) { return it.anchor()[j]; }, r, scratch, out);
    };

    Rng probe_rng = rng.split(candidate);
    Vector x = x0;
    double err = metric(x);
    if (err <= floor) return mu;  // already optimal: any candidate works

    // Burn-in epochs flush the fast modes so the measured epochs see the
    // slowest mode, which is what the candidate must control.
    bool accepted = true;
    for (int e = 0; e < 2 + opts.probe_epochs && accepted; ++e) {
      EpochResult er = run_epoch(oracles, x, params, probe_rng);
      if (!er.finite) {
        accepted = false;
        break;
      }
      x = std::move(er.output);
      const double next = metric(x);
      if (next <= floor) break;  // converged outright
      if (e >= 2 && !(next <= opts.accept_ratio * err)) accepted = false;
      err = next;
    }
    if (accepted) return mu;
  }
  throw std::runtime_error("mu_search: matrix appears singular");
}

}  // namespace nsls
