#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "nsls/eigensolver.hpp"
#include "nsls/generator.hpp"
#include "nsls/oracle.hpp"
#include "test_util.hpp"

using namespace nsls;

namespace {

RowMatrix diag_matrix(const std::vector<double>& entries) {
  DenseMatrix m = DenseMatrix::Zero(entries.size(), entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
  return from_dense(m);
}

}  // namespace

TEST_CASE("zero matrix: B = lam I solves in one step") {
  RowMatrix zero(2, 2, {make_row({}, {}), make_row({}, {})});
  ShiftInvertEngine engine(zero, 0.5, 0.0, kDenseOracleLimit);
  ShiftedSystem sys = engine.system(1.0);
  Vector rhs = Vector::Unit(2, 0);
  auto [x, trace] =
      engine.solve_system(sys, rhs, Vector::Zero(2), 0.5, 4, Rng(1));
  CHECK(trace.converged);
  CHECK((x - rhs).norm() < 1e-15);
}

TEST_CASE("shifted system matches the dense inverse in the B norm") {
  // A^T A = diag(4, 1), lam = 4.4.
  RowMatrix mat = diag_matrix({2, 1});
  oracle::DenseOracle dense(mat);
  ShiftInvertEngine engine(mat, 0.75, dense.lambda1(), kDenseOracleLimit);
  ShiftedSystem sys = engine.system(4.4);
  Rng rng(60);
  Vector rhs = test::random_vector(2, rng);
  const Vector x_star = dense.solve_shifted(4.4, rhs);
  auto [x, trace] =
      engine.solve_system(sys, rhs, Vector::Zero(2), 0.01, 30, Rng(2));
  CHECK(trace.converged);
  auto b_norm_sq = [&](const Vector& e) {
    return 4.4 * e.squaredNorm() - mat.apply(e).squaredNorm();
  };
  CHECK(b_norm_sq(x - x_star) <= 0.011 * b_norm_sq(x_star));
}

TEST_CASE("shifted system with zero rhs returns zero") {
  RowMatrix mat = diag_matrix({2, 1});
  ShiftInvertEngine engine(mat, 0.75, 4.0, kDenseOracleLimit);
  auto [x, trace] = engine.solve_system(engine.system(4.4), Vector::Zero(2),
                                        Vector::Zero(2), 0.5, 4, Rng(3));
  CHECK(trace.converged);
  CHECK(x.norm() == 0.0);
}

TEST_CASE("non positive-definite shift is rejected") {
  RowMatrix mat = diag_matrix({2, 1});
  ShiftInvertEngine engine(mat, 0.75, 4.0, kDenseOracleLimit);
  CHECK_THROWS_AS(engine.solve_system(engine.system(3.9), Vector::Ones(2),
                                      Vector::Zero(2), 0.5, 4, Rng(4)),
                  std::invalid_argument);
}

TEST_CASE("estimator for the shifted gradient is unbiased") {
  // E[lam x - samplemat(x)] = (lam I - A^T A) x via exact enumeration.
  Rng rng(61);
  RowMatrix mat = from_dense(test::random_powerlaw(4, 5, 1.0, rng), 0.0);
  SpectralStats stats = estimate_spectral(mat, 50, 7);
  const double sr = mat.frobenius_sq() / stats.lambda1_est;
  Vector x = test::random_vector(5, rng);
  const double lam = 1.3 * stats.lambda1_est;
  oracle::VectorMoments em =
      oracle::enumerate_samplemat(mat, std::sqrt(std::max(sr, 1.0)), x);
  Vector grad_mean = lam * x - em.mean;
  Vector target = lam * x - mat.gram_apply(x);
  CHECK((grad_mean - target).norm() <= 1e-10 * (1.0 + target.norm()));
}

TEST_CASE("variance bound 8M/gap holds at random probe points") {
  Rng rng(62);
  GenSpec spec;
  spec.n_rows = 24;
  spec.n_cols = 8;
  spec.target_s = 3.0;
  spec.seed = 13;
  Vector spectrum(8);
  spectrum << 1.0, 0.6, 0.5, 0.4, 0.3, 0.25, 0.2, 0.15;
  spec.spectrum = spectrum;
  RowMatrix mat = generate(spec);
  oracle::DenseOracle dense(mat);
  const double gap = dense.gap();
  REQUIRE(gap >= 0.3);

  ShiftInvertEngine engine(mat, gap, dense.lambda1(), kDenseOracleLimit);
  const double lam = (1.0 + gap / 120.0) * dense.lambda1();
  const double sigma2_bound = 8.0 * engine.plan().normalizer / gap;

  std::vector<RowSampler> samplers = make_row_samplers(mat, engine.plan());
  for (int probe = 0; probe < 5; ++probe) {
    Vector rhs = test::random_vector(8, rng);
    const Vector x_star = dense.solve_shifted(lam, rhs);
    Vector x = x_star + test::random_vector(8, rng);
    const double fgap = engine.objective(lam, rhs, x) -
                        engine.objective(lam, rhs, x_star);
    const double bound = sigma2_bound * fgap;
    Vector e = x - x_star;
    Vector target = lam * e - mat.gram_apply(e);
    auto est = [&](Rng& r, Vector& out) {
      out.setZero();
      GradientEstimate g =
          samplemat_diff_draw(engine.plan(), samplers, x, x_star, r);
      for (const auto& c : g.coords) out[c.first] -= c.second;
      out += lam * e;
    };
    oracle::MomentReport mc =
        oracle::monte_carlo_moments(est, target, bound, 100000, rng.split(probe));
    CHECK(mc.second_ok);
    CHECK(mc.mean_ok);
  }
}

TEST_CASE("top eigenvector of diag(9,1)") {
  RowMatrix mat = diag_matrix({3, 1});
  EigenConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.seed = 5;
  auto [v, report] = top_eigenvector(mat, cfg);
  CHECK(report.converged);
  CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
  CHECK(report.final_metric_value >= (1.0 - 1e-3) * 9.0);
  CHECK(std::abs(v[0]) >= 0.999);
  CHECK(v[0] > 0.0);  // deterministic sign
}

TEST_CASE("equal top eigenvalues still satisfy the quality criterion") {
  RowMatrix mat = from_dense(DenseMatrix::Identity(4, 4));
  EigenConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.seed = 6;
  auto [v, report] = top_eigenvector(mat, cfg);
  CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
  CHECK(report.final_metric_value >= (1.0 - 1e-3) * 1.0);
}

TEST_CASE("1x1 matrix converges immediately") {
  RowMatrix mat = from_dense(DenseMatrix::Constant(1, 1, 5.0));
  EigenConfig cfg;
  cfg.seed = 7;
  auto [v, report] = top_eigenvector(mat, cfg);
  CHECK(report.converged);
  CHECK(std::abs(std::abs(v[0]) - 1.0) <= 1e-12);
  CHECK(report.final_metric_value == doctest::Approx(25.0));
}

TEST_CASE("shift search lands in the window on diag(9,1)") {
  RowMatrix mat = diag_matrix({3, 1});
  ShiftSearchResult res = lambda_shift_search(mat, 0.5, Rng(8));
  CHECK(res.in_window);
  // Window relative to the settled Rayleigh quotient, which approaches 9.
  CHECK(res.rayleigh == doctest::Approx(9.0).epsilon(1e-3));
  CHECK(res.lam >= 9.0 * (1.0 + 0.5 / 160.0));
  CHECK(res.lam <= 9.0 * (1.0 + 0.5 / 95.0));
}

TEST_CASE("shift search warns when the supplied gap exceeds the measured gap") {
  RowMatrix mat = from_dense(2.0 * DenseMatrix::Identity(4, 4));
  ShiftSearchResult res = lambda_shift_search(mat, 0.5, Rng(9));
  bool warned = false;
  for (const std::string& w : res.warnings)
    warned = warned || w.find("exceeds measured gap") != std::string::npos;
  CHECK(warned);
  CHECK(res.lam > 4.0);  // still a usable PD shift
}

TEST_CASE("user-supplied lambda1 and gap place the shift in one step") {
  RowMatrix mat = diag_matrix({3, 1});
  EigenConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.seed = 10;
  cfg.lambda1_override = 9.0;
  cfg.gap_lower_bound = 0.5;
  auto [v, report] = top_eigenvector(mat, cfg);
  CHECK(report.converged);
  CHECK(report.metrics.at("shift_lam") ==
        doctest::Approx(9.0 * (1.0 + 0.5 / 120.0)));
}

TEST_CASE("accelerated and unaccelerated agree with gamma at its floor") {
  RowMatrix mat = diag_matrix({3, 1});
  EigenConfig cfg;
  cfg.epsilon = 1e-4;
  cfg.seed = 11;
  cfg.lambda1_override = 9.0;
  cfg.gap_lower_bound = 0.5;
  auto [vu, ru] = top_eigenvector(mat, cfg);
  cfg.accel.enabled = true;
  cfg.accel.gamma_override = 2.0 * (9.0 * (1.0 + 0.5 / 120.0) - 9.0);
  auto [va, ra] = top_eigenvector_accelerated(mat, cfg);
  CHECK(ru.converged);
  CHECK(ra.converged);
  CHECK((va - vu).norm() <= 1e-2);
  CHECK(ra.final_metric_value >= (1.0 - 1e-4) * 9.0);
}

TEST_CASE("balancing gamma matches the hand evaluation at n = d = 4") {
  // A = diag(2,1,1,1): lambda_1 = 4, sr = 7/4, s_i = 1, nnz = 4, so
  // gamma = sqrt(2 * 4 * sum(||a_i||^2 (1 + sqrt(7/4))) / 4).
  RowMatrix mat = diag_matrix({2, 1, 1, 1});
  const double sr = 7.0 / 4.0;
  double sum = 0.0;
  for (double norm_sq : {4.0, 1.0, 1.0, 1.0})
    sum += norm_sq * (1.0 + std::sqrt(sr));
  const double hand = std::sqrt(2.0 * 4.0 * sum / 4.0);

  EigenConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.seed = 12;
  cfg.lambda1_override = 4.0;
  cfg.gap_lower_bound = 0.7;
  cfg.accel.enabled = true;
  auto [v, report] = top_eigenvector_accelerated(mat, cfg);
  CHECK(report.converged);
  CHECK(report.metrics.at("accel_gamma") == doctest::Approx(hand));
}

TEST_CASE("moderate-gap generated instance converges with quality") {
  GenSpec spec;
  spec.n_rows = 40;
  spec.n_cols = 12;
  spec.target_s = 4.0;
  spec.seed = 21;
  Vector spectrum(12);
  spectrum[0] = 1.0;
  for (int j = 1; j < 12; ++j) spectrum[j] = 0.65 * std::pow(0.8, j - 1);
  spec.spectrum = spectrum;
  RowMatrix mat = generate(spec);
  oracle::DenseOracle dense(mat);
  REQUIRE(dense.gap() >= 0.3);

  EigenConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.seed = 31;
  auto [v, report] = top_eigenvector(mat, cfg);
  CHECK(report.converged);
  CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
  CHECK(report.final_metric_value >= (1.0 - 1e-3) * dense.lambda1());
  const Vector top = dense.top_eigenvector();
  CHECK(std::abs(v.dot(top)) >= 0.99);
}

TEST_CASE("eigen solves are reproducible from the seed") {
  RowMatrix mat = diag_matrix({3, 2, 1});
  EigenConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.seed = 99;
  auto [v1, r1] = top_eigenvector(mat, cfg);
  auto [v2, r2] = top_eigenvector(mat, cfg);
  CHECK(v1 == v2);
  CHECK(r1.coordinate_touches == r2.coordinate_touches);
}

TEST_CASE("expected touches per draw track sum p_i c_i within 2x") {
  Rng rng(64);
  GenSpec spec;
  spec.n_rows = 30;
  spec.n_cols = 16;
  spec.target_s = 5.0;
  spec.seed = 15;
  RowMatrix mat = generate(spec);
  oracle::DenseOracle dense(mat);
  ShiftInvertEngine engine(mat, 0.3, dense.lambda1(), kDenseOracleLimit);
  std::vector<RowSampler> samplers = make_row_samplers(mat, engine.plan());
  Vector x = test::random_vector(16, rng);
  double predicted = 0.0;
  for (int i = 0; i < mat.n_rows(); ++i)
    predicted += engine.plan().row_prob[i] * 4.0 * engine.plan().budgets[i];
  double total = 0.0;
  const long draws = 10000;
  for (long t = 0; t < draws; ++t)
    total += samplemat_draw(engine.plan(), samplers, x, rng).touch_count;
  const double measured = total / draws;
  CHECK(measured >= predicted / 2.0);
  CHECK(measured <= predicted * 2.0);
}

TEST_CASE("plan budgets for the eigensolver follow sqrt(s_i * sr)") {
  Rng rng(63);
  RowMatrix mat = from_dense(test::random_powerlaw(20, 10, 1.2, rng), 0.0);
  oracle::DenseOracle dense(mat);
  const double sr = mat.frobenius_sq() / dense.lambda1();
  ShiftInvertEngine engine(mat, 0.3, dense.lambda1(), kDenseOracleLimit);
  for (int i = 0; i < mat.n_rows(); ++i) {
    const SparseRow& r = mat.row(i);
    if (r.empty()) continue;
    const int expected = std::clamp(
        static_cast<int>(std::ceil(
            std::sqrt(r.numerical_sparsity) * std::sqrt(std::max(sr, 1.0)))),
        1, 10);
    CHECK(engine.plan().budgets[i] == expected);
  }
  CHECK(engine.sigma_sq() ==
        doctest::Approx(4.0 * engine.plan().normalizer / 0.3));
}
