#include "nsls/eigensolver.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "nsls/oracle.hpp"

namespace nsls {

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

void absorb_trace(SolveReport& report, const ConvergenceTrace& trace) {
  report.epochs += trace.epochs;
  report.inner_steps += trace.inner_steps;
  report.coordinate_touches += trace.touches;
  report.full_gradient_evals += trace.full_gradient_evals;
  if (!trace.note.empty()) report.warn(trace.note);
}

Vector random_unit(int d, Rng& rng) {
  Vector v(d);
  for (int j = 0; j < d; ++j) v[j] = rng.next_gaussian();
  const double n = v.norm();
  return n > 0.0 ? Vector(v / n) : Vector(Vector::Unit(d, 0));
}

// Deterministic sign: the largest-magnitude coordinate is positive.
void fix_sign(Vector& v) {
  int arg = 0;
  for (int j = 1; j < v.size(); ++j)
    if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
  if (v[arg] < 0.0) v = -v;
}

}  // namespace

ShiftInvertEngine::ShiftInvertEngine(const RowMatrix& mat, double gap_assumed,
                                     double lambda1_ref,
                                     std::int64_t dense_limit,
                                     const SvrgOverrides& overrides)
    : mat_(&mat),
      gap_assumed_(gap_assumed),
      lambda1_ref_(lambda1_ref),
      overrides_(overrides) {
  if (!(gap_assumed > 0.0))
    throw std::invalid_argument("shift-invert: gap_assumed must be positive");
  if (mat.frobenius_sq() == 0.0) {
    // B = lam I: systems solve in closed form, no sampling state needed.
    lambda1_ref_ = 0.0;
    return;
  }
  if (!(lambda1_ref > 0.0))
    throw std::invalid_argument("shift-invert: lambda1 reference must be positive");
  const double sr = mat.frobenius_sq() / lambda1_ref;
  plan_ = make_sampling_plan(mat, std::sqrt(std::max(sr, 1.0)));
  plan_.sigma_sq = 4.0 * plan_.normalizer / gap_assumed;
  samplers_ = make_row_samplers(mat, plan_);
  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  if (size <= dense_limit)
    oracle_ = std::make_unique<oracle::DenseOracle>(mat, dense_limit);
}

ShiftInvertEngine::~ShiftInvertEngine() = default;

ShiftedSystem ShiftInvertEngine::system(double lam) const {
  ShiftedSystem sys;
  sys.lam = lam;
  sys.lambda1_ref = lambda1_ref_;
  sys.gap_assumed = gap_assumed_;
  return sys;
}

double ShiftInvertEngine::objective(double lam, const Vector& rhs,
                                    const Vector& x) const {
  return 0.5 * (lam * x.squaredNorm() - mat_->apply(x).squaredNorm()) -
         rhs.dot(x);
}

double ShiftInvertEngine::rayleigh_quotient(const Vector& v) const {
  return mat_->apply(v).squaredNorm();
}

std::pair<Vector, ConvergenceTrace> ShiftInvertEngine::solve_system(
    const ShiftedSystem& sys, const Vector& rhs, const Vector& x_init,
    double target_ratio, int max_epochs, Rng rng) const {
  const double mu = sys.mu();
  if (!(mu > 0.0))
    throw std::invalid_argument("shifted system: lam <= lambda1, not PD");
  if (mat_->frobenius_sq() == 0.0) {
    // One full-gradient step solves B = lam I exactly.
    ConvergenceTrace trace;
    trace.converged = true;
    trace.full_gradient_evals = 1;
    trace.epochs = 1;
    return {Vector(rhs / sys.lam), trace};
  }
  const RowMatrix& mat = *mat_;
  const double lam = sys.lam;

  SvrgProblem problem;
  problem.sigma_sq = plan_.sigma_sq;
  problem.mu = mu;
  problem.overrides = overrides_;
  problem.oracles.lambda_shift = lam;
  problem.oracles.full_gradient_cost = mat.nnz();
  problem.oracles.grad_full = [&mat, &rhs, lam](const Vector& x) {
    Vector g = lam * x - mat.gram_apply(x);
    g -= rhs;
    return g;
  };
  auto scratch = std::make_shared<EstimateScratch>();
  problem.oracles.grad_diff = [this, scratch](const ImplicitIterate& it,
                                              Rng& r, GradientEstimate& out) {
    samplemat_diff(
        plan_, samplers_, [&](int j) { return it.coord(j); },
        [&](int j) { return it.anchor()[j]; }, r, *scratch, out);
    for (auto& c : out.coords) c.second = -c.second;
  };

  if (oracle_ && lam > oracle_->lambda1()) {
    const Vector x_star = oracle_->solve_shifted(lam, rhs);
    const double f_star = objective(lam, rhs, x_star);
    const double floor = 1e-13 * (1.0 + std::abs(f_star));
    problem.error_metric = [this, lam, rhs, f_star, floor](const Vector& x) {
      const double gap = objective(lam, rhs, x) - f_star;
      return gap <= floor ? 0.0 : gap;
    };
  } else {
    problem.error_metric = [&mat, lam, rhs, mu](const Vector& x) {
      Vector g = lam * x - mat.gram_apply(x);
      g -= rhs;
      return g.squaredNorm() / (2.0 * mu);
    };
  }
  return solve_constant_factor(problem, x_init, target_ratio, max_epochs, rng);
}

std::pair<Vector, ConvergenceTrace> ShiftInvertEngine::solve_system_accelerated(
    const ShiftedSystem& sys, const Vector& rhs, const Vector& x_init,
    double target_ratio, double gamma, Rng rng, SolveReport* counters) const {
  const double mu = sys.mu();
  if (!(mu > 0.0))
    throw std::invalid_argument("shifted system: lam <= lambda1, not PD");

  // Error metric for the outer (unregularized) system.
  std::function<double(const Vector&)> metric;
  if (oracle_ && sys.lam > oracle_->lambda1()) {
    const Vector x_star = oracle_->solve_shifted(sys.lam, rhs);
    const double f_star = objective(sys.lam, rhs, x_star);
    const double floor = 1e-13 * (1.0 + std::abs(f_star));
    metric = [this, sys, rhs, f_star, floor](const Vector& x) {
      const double gap = objective(sys.lam, rhs, x) - f_star;
      return gap <= floor ? 0.0 : gap;
    };
  } else {
    const RowMatrix& mat = *mat_;
    metric = [&mat, sys, rhs, mu](const Vector& x) {
      Vector g = sys.lam * x - mat.gram_apply(x);
      g -= rhs;
      return g.squaredNorm() / (2.0 * mu);
    };
  }

  ConvergenceTrace outer_trace;
  outer_trace.initial_error = metric(x_init);
  outer_trace.final_error = outer_trace.initial_error;
  if (outer_trace.initial_error <= 0.0 || target_ratio >= 1.0) {
    outer_trace.converged = true;
    return {x_init, outer_trace};
  }

  // Framework contract for the regularized subproblems.
  const double c_req = 4.0 * std::pow((2.0 * gamma + mu) / mu, 1.5);
  const double sub_ratio = 1.0 / c_req;
  const int sub_epochs =
      static_cast<int>(std::ceil(std::log2(c_req))) + 10;
  const double q = mu / (mu + gamma);
  double alpha = std::sqrt(q);

  const int max_prox =
      static_cast<int>(std::ceil(std::sqrt(gamma / mu) *
                                 std::log(1.0 / target_ratio) * 2.0)) +
      10;
  Vector x = x_init;
  Vector x_prev = x_init;
  Vector y = x_init;
  const ShiftedSystem sub = system(sys.lam + gamma);
  for (int t = 0; t < max_prox; ++t) {
    const Vector sub_rhs = rhs + gamma * y;
    auto [xs, trace] = solve_system(sub, sub_rhs, y, sub_ratio, sub_epochs,
                                    rng.split(t));
    outer_trace.inner_steps += trace.inner_steps;
    outer_trace.touches += trace.touches;
    outer_trace.epochs += trace.epochs;
    outer_trace.full_gradient_evals += trace.full_gradient_evals;
    if (counters && !trace.converged && !trace.note.empty())
      counters->warn(trace.note);
    x_prev = std::move(x);
    x = std::move(xs);
    const double err = metric(x);
    outer_trace.residuals.push_back(err);
    outer_trace.final_error = err;
    if (err <= target_ratio * outer_trace.initial_error) {
      outer_trace.converged = true;
      break;
    }
    const double rhs_term = q - alpha * alpha;
    const double alpha_next =
        0.5 *
        (rhs_term + std::sqrt(rhs_term * rhs_term + 4.0 * alpha * alpha));
    const double beta = alpha * (1.0 - alpha) / (alpha * alpha + alpha_next);
    y = x + beta * (x - x_prev);
    alpha = alpha_next;
  }
  return {std::move(x), std::move(outer_trace)};
}

ShiftSearchResult lambda_shift_search(const RowMatrix& mat,
                                      double gap_lower_bound, Rng rng,
                                      const EigenConfig& cfg) {
  if (!(gap_lower_bound > 0.0 && gap_lower_bound < 1.0))
    throw std::invalid_argument("shift search: gap lower bound must be in (0,1)");
  const double g = gap_lower_bound;

  SpectralStats stats = estimate_spectral(mat, cfg.power_iters, cfg.seed + 17,
                                          cfg.dense_limit);
  ShiftSearchResult result;
  if (stats.dense_path && stats.gap_est < 0.5 * g)
    result.warnings.push_back(
        "shift search: supplied gap lower bound exceeds measured gap");

  const double lambda1_ref = stats.lambda1_est;
  ShiftInvertEngine engine(mat, g, lambda1_ref, cfg.dense_limit, cfg.svrg);

  Vector v = random_unit(mat.n_cols(), rng);
  double rq = engine.rayleigh_quotient(v);
  double lam = (1.0 + g / 100.0) * mat.frobenius_sq();
  double lam_good = lam;
  Vector x = Vector::Zero(mat.n_cols());

  // The window test is relative to RQ(v), a lower bound on lambda_1, so a
  // shift is only accepted once RQ has settled; otherwise the placed lam
  // could end up below lambda_1 itself.
  const int budget = 60;
  int stagnant = 0;
  bool settled = false;
  for (int round = 0; round < budget; ++round) {
    const double lo = (1.0 + g / 150.0) * rq;
    const double hi = (1.0 + g / 100.0) * rq;
    if (lam <= hi && settled) {
      if (lam < lo) lam = (1.0 + g / 120.0) * rq;
      result.in_window = true;
      break;
    }

    // Solve at the current shift; divergence means lam dipped under
    // lambda_1, so back off toward the last good shift.
    ShiftedSystem sys = engine.system(lam);
    sys.lambda1_ref = std::max(lambda1_ref, rq);
    if (sys.mu() <= 0.0) {
      lam = 0.5 * (lam + lam_good);
      continue;
    }
    auto [xs, trace] =
        engine.solve_system(sys, v, x, 0.5, 4, rng.split(round));
    result.counters.epochs += trace.epochs;
    result.counters.inner_steps += trace.inner_steps;
    result.counters.coordinate_touches += trace.touches;
    result.counters.full_gradient_evals += trace.full_gradient_evals;
    if (trace.diverged || !xs.allFinite() || xs.norm() == 0.0) {
      lam = 0.5 * (lam + lam_good);
      continue;
    }
    lam_good = lam;
    x = xs;
    v = xs / xs.norm();
    const double next_rq = engine.rayleigh_quotient(v);
    const double delta = next_rq - rq;
    settled = delta <= 1e-3 * g * std::max(rq, 1e-300);
    stagnant = delta <= 1e-12 * std::max(rq, 1e-300) ? stagnant + 1 : 0;
    rq = std::max(rq, next_rq);
    if (lam > (1.0 + g / 100.0) * rq) {
      lam = rq + 0.5 * (lam - rq);  // halve the over-shift
    } else if (lam < (1.0 + g / 150.0) * rq) {
      lam = (1.0 + g / 120.0) * rq;  // RQ outgrew the shift, re-place it
    }
    if (stagnant >= 8) {
      result.warnings.push_back(
          "shift search: rayleigh quotient stagnated before the window was "
          "reached; placing shift from the settled value");
      lam = (1.0 + g / 120.0) * rq;
      result.in_window = true;
      break;
    }
  }
  if (!result.in_window) {
    const double lo = (1.0 + g / 150.0) * rq;
    const double hi = (1.0 + g / 100.0) * rq;
    if (lam >= lo && lam <= hi && settled) {
      result.in_window = true;
    } else {
      result.warnings.push_back(
          "shift search: window not reached within budget, returning best lam");
      lam = std::max(lam, (1.0 + g / 120.0) * rq);
    }
  }
  result.lam = lam;
  result.v = v;
  result.rayleigh = rq;
  return result;
}

namespace {

struct EigenSetup {
  double lambda1_ref = 0.0;
  double gap_assumed = 0.0;
  bool oracle_ref = false;
};

EigenSetup eigen_setup(const RowMatrix& mat, const EigenConfig& cfg,
                       SolveReport& report) {
  EigenSetup setup;
  SpectralStats stats =
      estimate_spectral(mat, cfg.power_iters, cfg.seed + 29, cfg.dense_limit);
  setup.oracle_ref = stats.dense_path;
  setup.lambda1_ref = cfg.lambda1_override.value_or(stats.lambda1_est);
  if (cfg.gap_lower_bound) {
    setup.gap_assumed = *cfg.gap_lower_bound;
  } else if (stats.dense_path && stats.gap_est > 0.0) {
    setup.gap_assumed = stats.gap_est;
  } else {
    setup.gap_assumed = 1e-3;
    report.warn("gap lower bound unavailable; assuming 1e-3");
  }
  if (!(setup.gap_assumed > 0.0 && setup.gap_assumed < 1.0))
    throw std::invalid_argument("eigensolver: gap bound must lie in (0,1)");
  if (!setup.oracle_ref)
    report.warn("convergence checked against power-iteration lambda1 "
                "estimate (above dense limit)");
  return setup;
}

std::pair<Vector, SolveReport> run_top_eigenvector(const RowMatrix& mat,
                                                   const EigenConfig& cfg,
                                                   bool accelerated) {
  Stopwatch watch;
  SolveReport report;
  report.final_metric_name = "rayleigh_quotient";
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    throw std::invalid_argument("eigensolver: epsilon must lie in (0,1)");
  if (mat.frobenius_sq() == 0.0)
    throw std::invalid_argument("eigensolver: zero matrix");

  EigenSetup setup = eigen_setup(mat, cfg, report);
  Rng rng(cfg.seed);
  Vector v = random_unit(mat.n_cols(), rng);

  const double quality_ref = setup.lambda1_ref;
  auto rq_of = [&mat](const Vector& u) { return mat.apply(u).squaredNorm(); };
  double rq = rq_of(v);

  // Shift placement: direct when lambda1 is supplied, searched otherwise.
  double lam;
  if (cfg.lambda1_override && cfg.gap_lower_bound) {
    lam = (1.0 + setup.gap_assumed / 120.0) * (*cfg.lambda1_override);
  } else if (rq >= (1.0 - cfg.epsilon) * quality_ref) {
    // Degenerate-gap fast path: the start vector already qualifies.
    fix_sign(v);
    report.converged = true;
    report.final_metric_value = rq;
    report.metrics["lambda1_ref"] = quality_ref;
    report.wall_time_ms = watch.ms();
    return {std::move(v), std::move(report)};
  } else {
    ShiftSearchResult search =
        lambda_shift_search(mat, setup.gap_assumed, rng.split(1), cfg);
    lam = search.lam;
    v = search.v;
    rq = search.rayleigh;
    report.merge_counters(search.counters);
    for (const std::string& w : search.warnings) report.warn(w);
    // Validity check against the spectral reference, as the system invariant
    // allows: the searched shift must sit above lambda_1.
    const double floor_lam =
        (1.0 + setup.gap_assumed / 150.0) * std::max(setup.lambda1_ref, rq);
    if (lam < floor_lam) {
      report.warn("searched shift below the lambda_1 reference; clamped up");
      lam = (1.0 + setup.gap_assumed / 120.0) * std::max(setup.lambda1_ref, rq);
    }
  }

  ShiftInvertEngine engine(mat, setup.gap_assumed, setup.lambda1_ref,
                           cfg.dense_limit, cfg.svrg);
  double gamma = 0.0;
  if (accelerated) {
    double sum = 0.0;
    const double sr = mat.frobenius_sq() / setup.lambda1_ref;
    for (const SparseRow& r : mat.rows()) {
      const double s = r.numerical_sparsity;
      sum += r.l2_norm_sq * (std::sqrt(s) + std::sqrt(sr)) * std::sqrt(s);
    }
    gamma = cfg.accel.gamma_override.value_or(
        std::sqrt(2.0 * setup.lambda1_ref * sum /
                  static_cast<double>(mat.nnz())));
    const double floor = 2.0 * (lam - setup.lambda1_ref);
    if (gamma < floor) {
      report.warn("accel: balancing gamma below 2(lam - lambda1), clamped up");
      gamma = floor;
    }
    report.metrics["accel_gamma"] = gamma;
  }

  const double dg = static_cast<double>(mat.n_cols()) / setup.gap_assumed;
  const int base_budget =
      static_cast<int>(std::ceil(std::pow(std::log(std::max(dg, 3.0)), 2.0))) +
      static_cast<int>(std::ceil(std::log(1.0 / cfg.epsilon)));
  const int outer_budget =
      cfg.outer_budget > 0 ? cfg.outer_budget : 10 * base_budget;

  Vector x = Vector::Zero(mat.n_cols());
  const double target_rq = (1.0 - cfg.epsilon) * quality_ref;
  std::vector<double> best_history{rq};
  int diverged_streak = 0;
  ShiftedSystem sys = engine.system(lam);
  for (int outer = 0; outer < outer_budget; ++outer) {
    std::pair<Vector, ConvergenceTrace> solved =
        accelerated
            ? engine.solve_system_accelerated(sys, v, x, 0.25, gamma,
                                              rng.split(100 + outer), &report)
            : engine.solve_system(sys, v, x, 0.25, cfg.solve_max_epochs,
                                  rng.split(100 + outer));
    absorb_trace(report, solved.second);
    if (!solved.first.allFinite() || solved.first.norm() == 0.0) {
      report.warn("system solve failed (lam <= lambda1? gap overestimated?)");
      break;
    }
    diverged_streak = solved.second.diverged ? diverged_streak + 1 : 0;
    if (diverged_streak >= 2) {
      report.warn("system solves keep diverging (lam too close to lambda1 "
                  "or gap overestimated)");
      break;
    }
    x = std::move(solved.first);
    v = x / x.norm();
    const double next_rq = rq_of(v);
    report.residual_trace.push_back(next_rq);
    if (next_rq >= target_rq) {
      rq = next_rq;
      report.converged = true;
      break;
    }
    rq = std::max(rq, next_rq);
    best_history.push_back(rq);
    // Stagnation: over the last 3 outer iterations the best quotient moved
    // by less than a thousandth of the remaining distance to the target.
    if (best_history.size() >= 4) {
      const double gain = rq - best_history[best_history.size() - 4];
      const double needed = target_rq - rq;
      if (gain <= std::max(1e-12 * quality_ref, 1e-3 * needed)) {
        report.warn("rayleigh quotient stagnated over 3 outer iterations "
                    "(gap likely overestimated)");
        break;
      }
    }
  }

  v.normalize();
  fix_sign(v);
  report.final_metric_value = rq_of(v);
  report.metrics["lambda1_ref"] = quality_ref;
  report.metrics["shift_lam"] = lam;
  report.metrics["sigma_sq"] = engine.sigma_sq();
  report.wall_time_ms = watch.ms();
  return {std::move(v), std::move(report)};
}

}  // namespace

std::pair<Vector, SolveReport> top_eigenvector(const RowMatrix& mat,
                                               const EigenConfig& cfg) {
  return run_top_eigenvector(mat, cfg, false);
}

std::pair<Vector, SolveReport> top_eigenvector_accelerated(
    const RowMatrix& mat, const EigenConfig& cfg) {
  return run_top_eigenvector(mat, cfg, true);
}

}  // namespace nsls
