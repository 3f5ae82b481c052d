#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nsls/rng.hpp"
#include "nsls/sampling.hpp"
#include "nsls/sparse_matrix.hpp"

namespace nsls {

// Iterate stored as gamma * v + delta0 * anchor + delta1 * w, where anchor is
// the epoch anchor x_0 and w = grad f(x_0). Reading a coordinate is O(1) and a
// sparse step touches only the sampled coordinates plus three scalars, so an
// inner iteration costs O(c_i) regardless of d. A lazily flushed running sum
// makes the epoch average available without materializing any iterate.
class ImplicitIterate {
 public:
  ImplicitIterate(const Vector& anchor, const Vector& full_grad,
                  double renorm_threshold = 1e-6);

  double coord(int j) const {
    return gamma_ * v_[j] + delta0_ * (*anchor_)[j] + delta1_ * (*w_)[j];
  }
  const Vector& anchor() const { return *anchor_; }
  double gamma() const { return gamma_; }

  // x <- (1 - eta*lambda) x + eta*lambda * anchor - eta * w
  void apply_step_scalars(double eta, double lambda_shift);
  // x <- x + scale * sparse
  void add_sparse(const std::vector<std::pair<int, double>>& coords,
                  double scale);
  // Record the just-completed iterate into the running sum.
  void accumulate_average();

  void renormalize();
  Vector materialize() const;
  // Mean of the iterates recorded so far; flushes all lazy sums.
  Vector average();

  bool finite() const;

 private:
  void flush_coord(int j);
  void flush_all();

  const Vector* anchor_;
  const Vector* w_;
  Vector v_;
  double gamma_ = 1.0;
  double delta0_ = 1.0;
  double delta1_ = 0.0;
  double renorm_threshold_;

  long steps_recorded_ = 0;
  double gamma_sum_ = 0.0;   // sum of gamma over recorded steps
  double delta0_sum_ = 0.0;
  double delta1_sum_ = 0.0;
  Vector v_sum_;             // lazily flushed sum of gamma_t * v_t per coord
  Vector gamma_mark_;        // gamma_sum_ value at last flush per coord
};

struct SvrgOverrides {
  std::optional<double> eta;
  std::optional<long> m;
  std::optional<double> renorm_threshold;
};

// Step size and epoch length derived from the variance parameter and strong
// convexity. Defaults eta = 1/(8 sigma^2), m = ceil(64 sigma^2 / mu) make the
// per-epoch expected error factor exactly
//   (1 / (1 - 2 eta sigma^2)) * (1 / (m eta mu) + 2 eta sigma^2) <= 1/2.
// Construction rejects any combination whose factor is not < 1.
struct SvrgParams {
  double eta = 0.0;
  long m = 0;
  double sigma_sq = 0.0;
  double mu = 0.0;
  double renorm_threshold = 1e-6;
  double rate_factor = 0.0;
};

SvrgParams derive_params(double sigma_sq, double mu,
                         const SvrgOverrides& overrides = {});

// The two gradient oracles an epoch needs. grad_diff writes an estimate of
//   grad g(x_k) - grad g(x_0) - lambda_shift * (x_k - x_0)
// into `out`; it must evaluate both points with the same random draws.
struct EpochOracles {
  std::function<Vector(const Vector&)> grad_full;
  std::function<void(const ImplicitIterate&, Rng&, GradientEstimate&)>
      grad_diff;
  double lambda_shift = 0.0;
  long full_gradient_cost = 0;  // touch charge per grad_full evaluation
  // Optional: evaluated on the epoch output and recorded in the result.
  std::function<double(const Vector&)> residual_metric;
};

struct EpochResult {
  Vector output;          // average of the m inner iterates
  long touches = 0;       // estimate touches + one full-gradient charge
  long steps = 0;
  double residual = 0.0;  // residual_metric at the output, when supplied
  bool finite = true;
  long failed_at_step = -1;
};

EpochResult run_epoch(const EpochOracles& oracles, const Vector& x0,
                      const SvrgParams& params, Rng& rng);

struct SvrgProblem {
  EpochOracles oracles;
  double sigma_sq = 0.0;
  double mu = 0.0;
  std::function<double(const Vector&)> error_metric;
  SvrgOverrides overrides;
};

struct ConvergenceTrace {
  bool converged = false;
  bool diverged = false;
  int epochs = 0;
  long inner_steps = 0;
  long touches = 0;
  int full_gradient_evals = 0;
  std::vector<double> residuals;  // error metric after each epoch
  double initial_error = 0.0;
  double final_error = 0.0;
  std::string note;
};

// Chains epochs (each output is the next anchor) until the error metric has
// dropped by target_ratio or max_epochs is exhausted.
std::pair<Vector, ConvergenceTrace> solve_constant_factor(
    const SvrgProblem& problem, const Vector& x_init, double target_ratio,
    int max_epochs, Rng rng);

}  // namespace nsls
