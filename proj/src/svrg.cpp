#include "nsls/svrg.hpp"

#include <cmath>
#include <stdexcept>

namespace nsls {

ImplicitIterate::ImplicitIterate(const Vector& anchor, const Vector& full_grad,
                                 double renorm_threshold)
    : anchor_(&anchor),
      w_(&full_grad),
      v_(Vector::Zero(anchor.size())),
      renorm_threshold_(renorm_threshold),
      v_sum_(Vector::Zero(anchor.size())),
      gamma_mark_(Vector::Zero(anchor.size())) {}

void ImplicitIterate::apply_step_scalars(double eta, double lambda_shift) {
  const double decay = 1.0 - eta * lambda_shift;
  gamma_ *= decay;
  delta0_ = decay * delta0_ + eta * lambda_shift;
  delta1_ = decay * delta1_ - eta;
  if (std::abs(gamma_) < renorm_threshold_) renormalize();
}

void ImplicitIterate::flush_coord(int j) {
  v_sum_[j] += v_[j] * (gamma_sum_ - gamma_mark_[j]);
  gamma_mark_[j] = gamma_sum_;
}

void ImplicitIterate::flush_all() {
  for (int j = 0; j < v_.size(); ++j) flush_coord(j);
}

void ImplicitIterate::add_sparse(
    const std::vector<std::pair<int, double>>& coords, double scale) {
  const double inv_gamma = scale / gamma_;
  for (const auto& c : coords) {
    flush_coord(c.first);
    v_[c.first] += c.second * inv_gamma;
  }
}

void ImplicitIterate::accumulate_average() {
  ++steps_recorded_;
  gamma_sum_ += gamma_;
  delta0_sum_ += delta0_;
  delta1_sum_ += delta1_;
}

void ImplicitIterate::renormalize() {
  flush_all();
  v_ *= gamma_;
  gamma_ = 1.0;
}

Vector ImplicitIterate::materialize() const {
  return gamma_ * v_ + delta0_ * (*anchor_) + delta1_ * (*w_);
}

Vector ImplicitIterate::average() {
  if (steps_recorded_ == 0) return materialize();
  flush_all();
  const double inv_m = 1.0 / static_cast<double>(steps_recorded_);
  return inv_m * (v_sum_ + delta0_sum_ * (*anchor_) + delta1_sum_ * (*w_));
}

bool ImplicitIterate::finite() const {
  return std::isfinite(gamma_) && std::isfinite(delta0_) &&
         std::isfinite(delta1_);
}

SvrgParams derive_params(double sigma_sq, double mu,
                         const SvrgOverrides& overrides) {
  if (!(sigma_sq > 0.0))
    throw std::invalid_argument("svrg: variance parameter must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("svrg: not strongly convex");
  SvrgParams p;
  p.sigma_sq = sigma_sq;
  p.mu = mu;
  p.eta = overrides.eta.value_or(1.0 / (8.0 * sigma_sq));
  p.m = overrides.m.value_or(
      static_cast<long>(std::ceil(64.0 * sigma_sq / mu)));
  if (overrides.renorm_threshold) p.renorm_threshold = *overrides.renorm_threshold;
  if (p.m < 1) throw std::invalid_argument("svrg: epoch length must be >= 1");
  const double drift = 2.0 * p.eta * sigma_sq;
  if (!(drift < 1.0))
    throw std::invalid_argument("svrg: 2*eta*sigma^2 must be below 1");
  p.rate_factor = (1.0 / (1.0 - drift)) *
                  (1.0 / (static_cast<double>(p.m) * p.eta * mu) + drift);
  if (!(p.rate_factor < 1.0))
    throw std::invalid_argument(
        "svrg: parameters give expected per-epoch factor >= 1");
  return p;
}

EpochResult run_epoch(const EpochOracles& oracles, const Vector& x0,
                      const SvrgParams& params, Rng& rng) {
  EpochResult result;
  const Vector w = oracles.grad_full(x0);
  result.touches = oracles.full_gradient_cost;

  ImplicitIterate iterate(x0, w, params.renorm_threshold);
  GradientEstimate est;
  est.coords.reserve(64);

  for (long k = 0; k < params.m; ++k) {
    oracles.grad_diff(iterate, rng, est);
    iterate.apply_step_scalars(params.eta, oracles.lambda_shift);
    iterate.add_sparse(est.coords, -params.eta);
    iterate.accumulate_average();
    result.touches += est.touch_count;
    ++result.steps;
    if (!std::isfinite(est.scalar_dot) || !iterate.finite()) {
      result.finite = false;
      result.failed_at_step = k;
      break;
    }
  }
  result.output = iterate.average();
  if (result.finite && !result.output.allFinite()) {
    result.finite = false;
    result.failed_at_step = result.steps;
  }
  if (oracles.residual_metric && result.finite)
    result.residual = oracles.residual_metric(result.output);
  return result;
}

std::pair<Vector, ConvergenceTrace> solve_constant_factor(
    const SvrgProblem& problem, const Vector& x_init, double target_ratio,
    int max_epochs, Rng rng) {
  if (!(target_ratio > 0.0))
    throw std::invalid_argument("svrg: target ratio must be positive");
  ConvergenceTrace trace;
  Vector x = x_init;
  trace.initial_error = problem.error_metric(x);
  trace.final_error = trace.initial_error;
  if (target_ratio >= 1.0 || trace.initial_error <= 0.0) {
    trace.converged = true;
    return {std::move(x), trace};
  }

  const SvrgParams params =
      derive_params(problem.sigma_sq, problem.mu, problem.overrides);
  EpochOracles oracles = problem.oracles;
  oracles.residual_metric = problem.error_metric;
  double best = trace.initial_error;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    EpochResult er = run_epoch(oracles, x, params, rng);
    ++trace.epochs;
    ++trace.full_gradient_evals;
    trace.inner_steps += er.steps;
    trace.touches += er.touches;
    if (!er.finite) {
      trace.diverged = true;
      trace.note = "non-finite iterate at inner step " +
                   std::to_string(er.failed_at_step) +
                   " (step size too large for this instance)";
      break;
    }
    x = std::move(er.output);
    const double err = er.residual;
    trace.residuals.push_back(err);
    trace.final_error = err;
    if (!std::isfinite(err) ||
        (err > 4.0 * best && err > trace.initial_error)) {
      trace.diverged = true;
      trace.note = "error metric diverging (variance parameter understated?)";
      break;
    }
    best = std::min(best, err);
    if (err <= target_ratio * trace.initial_error) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(x), trace};
}

}  // namespace nsls
