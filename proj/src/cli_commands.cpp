#include "nsls/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nsls/eigensolver.hpp"
#include "nsls/generator.hpp"
#include "nsls/oracle.hpp"
#include "nsls/regression.hpp"
#include "nsls/report.hpp"
#include "nsls/sampling.hpp"

namespace nsls {

namespace {

using nlohmann::ordered_json;

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j;
  j["command"] = cfg.command;
  j["input"] = cfg.input_path;
  if (!cfg.rhs_path.empty()) j["rhs"] = cfg.rhs_path;
  j["output"] = cfg.output_path;
  j["format"] = cfg.format;
  j["epsilon"] = cfg.epsilon;
  j["seed"] = cfg.seed;
  j["accel"] = cfg.accel;
  if (cfg.run_mu_search) j["mu_search"] = true;
  if (cfg.max_epochs > 0) j["max_epochs"] = cfg.max_epochs;
  if (cfg.max_outers > 0) j["max_outers"] = cfg.max_outers;
  if (cfg.k_override) j["k"] = *cfg.k_override;
  if (cfg.mu_override) j["mu"] = *cfg.mu_override;
  if (cfg.lambda1_override) j["lambda1"] = *cfg.lambda1_override;
  if (cfg.gap_override) j["gap"] = *cfg.gap_override;
  if (cfg.accel_lam_override) j["accel_lam"] = *cfg.accel_lam_override;
  if (cfg.accel_gamma_override) j["accel_gamma"] = *cfg.accel_gamma_override;
  if (cfg.command == "verify") j["draws"] = cfg.verify_draws;
  if (cfg.command == "gen") {
    j["rows"] = cfg.gen_rows;
    j["cols"] = cfg.gen_cols;
    j["target_s"] = cfg.gen_target_s;
    j["row_norm"] = cfg.gen_row_norm;
    j["spectrum"] = cfg.gen_spectrum;
    if (cfg.gen_spectrum == "geom") j["cond"] = cfg.gen_cond;
  }
  return j;
}

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.output_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(cfg.output_path);
  if (!out) throw std::runtime_error("cannot write " + cfg.output_path);
  out << text << "\n";
}

void emit_report(const RunConfig& cfg, SolveReport report) {
  report.config_echo = run_config_to_json(cfg);
  emit(cfg, cfg.format == "csv" ? report_to_csv(report)
                                : report_to_json(report));
}

Vector load_rhs(const std::string& path, int expected) {
  RowMatrix mat = load_matrix_market(path);
  if (mat.n_cols() != 1 || mat.n_rows() != expected)
    throw std::runtime_error("rhs must be a " + std::to_string(expected) +
                             "x1 MatrixMarket vector");
  Vector b = Vector::Zero(expected);
  for (int i = 0; i < expected; ++i)
    if (!mat.row(i).empty()) b[i] = mat.row(i).values[0];
  return b;
}

// Planted right-hand side when none is supplied: b = A x_star + noise.
Vector synthesize_rhs(const RowMatrix& mat, std::uint64_t seed,
                      SolveReport& report) {
  Rng rng(Rng(seed).split(9001).next_u64());
  Vector x_star(mat.n_cols());
  for (int j = 0; j < mat.n_cols(); ++j) x_star[j] = rng.next_gaussian();
  Vector b = mat.apply(x_star);
  const double scale =
      0.01 * (b.size() > 0 ? b.norm() / std::sqrt(double(b.size())) : 1.0);
  for (int i = 0; i < b.size(); ++i) b[i] += scale * rng.next_gaussian();
  report.warn("rhs synthesized from a planted solution (seeded)");
  return b;
}

double resolve_mu(const RunConfig& cfg, const RowMatrix& mat,
                  SolveReport& report) {
  if (cfg.mu_override) return *cfg.mu_override;
  if (cfg.run_mu_search) {
    MuSearchOptions opts;
    opts.seed = cfg.seed + 3;
    SolveReport scratch;
    Vector b = cfg.rhs_path.empty() ? synthesize_rhs(mat, cfg.seed, scratch)
                                    : load_rhs(cfg.rhs_path, mat.n_rows());
    const double mu = mu_search(mat, b, opts);
    report.warn("mu found by geometric search");
    return mu;
  }
  SpectralStats stats = estimate_spectral(mat, 60, cfg.seed + 5);
  if (!stats.dense_path)
    throw std::invalid_argument(
        "mu unavailable: matrix above dense limit, pass --mu or --mu-search");
  if (stats.mu_est <= 0.0)
    throw std::invalid_argument(
        "matrix is rank deficient (mu = 0): regression rejected");
  return stats.mu_est;
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
  return config_json(cfg).dump();
}

int cmd_solve_regression(const RunConfig& cfg) {
  RowMatrix mat = load_matrix_market(cfg.input_path);
  SolveReport pre;
  const double mu = resolve_mu(cfg, mat, pre);
  Vector b = cfg.rhs_path.empty() ? synthesize_rhs(mat, cfg.seed, pre)
                                  : load_rhs(cfg.rhs_path, mat.n_rows());

  RegressionProblem prob;
  prob.mat = &mat;
  prob.b = std::move(b);
  prob.mu = mu;
  RegressionConfig rc;
  rc.epsilon = cfg.epsilon;
  rc.seed = cfg.seed;
  rc.max_epochs = cfg.max_epochs;
  rc.k_override = cfg.k_override;
  rc.accel.enabled = cfg.accel;
  rc.accel.lam_override = cfg.accel_lam_override;

  auto [x, report] = cfg.accel ? solve_regression_accelerated(prob, rc)
                               : solve_regression(prob, rc);
  report.clamps_and_warnings.insert(report.clamps_and_warnings.begin(),
                                    pre.clamps_and_warnings.begin(),
                                    pre.clamps_and_warnings.end());
  emit_report(cfg, report);
  return report.converged ? kExitOk : kExitNotConverged;
}

int cmd_top_eigenvector(const RunConfig& cfg) {
  RowMatrix mat = load_matrix_market(cfg.input_path);
  EigenConfig ec;
  ec.epsilon = cfg.epsilon;
  ec.seed = cfg.seed;
  ec.gap_lower_bound = cfg.gap_override;
  ec.lambda1_override = cfg.lambda1_override;
  ec.accel.enabled = cfg.accel;
  ec.accel.gamma_override = cfg.accel_gamma_override;
  ec.outer_budget = cfg.max_outers;

  auto [v, report] = cfg.accel ? top_eigenvector_accelerated(mat, ec)
                               : top_eigenvector(mat, ec);
  emit_report(cfg, report);
  return report.converged ? kExitOk : kExitNotConverged;
}

int cmd_gen(const RunConfig& cfg) {
  GenSpec spec;
  spec.n_rows = cfg.gen_rows;
  spec.n_cols = cfg.gen_cols;
  spec.target_s = cfg.gen_target_s;
  spec.row_norm = cfg.gen_row_norm;
  spec.seed = cfg.seed;
  if (cfg.gen_spectrum == "flat") {
    spec.spectrum = Vector::Ones(cfg.gen_cols);
  } else if (cfg.gen_spectrum == "geom") {
    Vector s(cfg.gen_cols);
    for (int j = 0; j < cfg.gen_cols; ++j)
      s[j] = std::pow(cfg.gen_cond,
                      -static_cast<double>(j) /
                          std::max(1, cfg.gen_cols - 1));
    spec.spectrum = s;
  } else if (cfg.gen_spectrum != "none") {
    throw std::invalid_argument("gen: spectrum must be none|flat|geom");
  }
  RowMatrix mat = generate(spec);
  if (cfg.output_path.empty())
    throw std::invalid_argument("gen: --out is required");
  save_matrix_market(mat, cfg.output_path);

  ordered_json j;
  j["config"] = config_json(cfg);
  j["written"] = cfg.output_path;
  const std::int64_t size =
      static_cast<std::int64_t>(mat.n_rows()) * mat.n_cols();
  if (size <= kDenseOracleLimit) {
    FamilySummary fam = measure_family(mat);
    j["mean_numerical_sparsity"] = fam.mean_numerical_sparsity;
    j["stable_rank"] = fam.stable_rank;
    j["kappa"] = fam.kappa;
    j["gap"] = fam.gap;
    j["nnz"] = fam.nnz;
  }
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_stats(const RunConfig& cfg) {
  RowMatrix mat = load_matrix_market(cfg.input_path);
  SpectralStats stats = estimate_spectral(mat, 100, cfg.seed);
  FamilySummary fam = measure_family(mat);
  ordered_json j;
  j["config"] = config_json(cfg);
  j["n_rows"] = mat.n_rows();
  j["n_cols"] = mat.n_cols();
  j["nnz"] = mat.nnz();
  j["frobenius_sq"] = mat.frobenius_sq();
  j["mean_numerical_sparsity"] = fam.mean_numerical_sparsity;
  j["lambda1"] = stats.lambda1_est;
  j["mu"] = stats.mu_est;
  j["stable_rank"] = stats.stable_rank_est;
  j["kappa"] = stats.kappa_est;
  j["gap"] = stats.gap_est;
  j["dense_path"] = stats.dense_path;
  emit(cfg, j.dump(2));
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg) {
  RowMatrix mat = load_matrix_market(cfg.input_path);
  SpectralStats stats = estimate_spectral(mat, 60, cfg.seed + 11);
  double k;
  if (cfg.k_override) {
    k = *cfg.k_override;
  } else if (stats.mu_est > 0.0) {
    k = std::sqrt(mat.frobenius_sq() / stats.mu_est);
  } else {
    k = std::sqrt(std::max(1.0, stats.stable_rank_est));
  }
  oracle::VerifyOptions opts;
  opts.seed = cfg.seed;
  opts.draws = cfg.verify_draws;
  std::vector<oracle::PropertyCheck> checks =
      oracle::verify_matrix(mat, k, opts);

  bool all_pass = true;
  ordered_json items = ordered_json::array();
  for (const oracle::PropertyCheck& check : checks) {
    all_pass = all_pass && check.pass;
    std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.property
              << "  measured=" << check.measured << " bound=" << check.bound
              << "  " << check.detail << "\n";
    ordered_json item;
    item["property"] = check.property;
    item["pass"] = check.pass;
    item["measured"] = check.measured;
    item["bound"] = check.bound;
    items.push_back(item);
  }
  if (!cfg.output_path.empty()) {
    ordered_json j;
    j["config"] = config_json(cfg);
    j["checks"] = items;
    j["all_pass"] = all_pass;
    std::ofstream out(cfg.output_path);
    if (!out) throw std::runtime_error("cannot write " + cfg.output_path);
    out << j.dump(2) << "\n";
  }
  return all_pass ? kExitOk : kExitNotConverged;
}

namespace {

int dispatch(const RunConfig& cfg) {
  if (cfg.command == "solve-regression") return cmd_solve_regression(cfg);
  if (cfg.command == "top-eigenvector") return cmd_top_eigenvector(cfg);
  if (cfg.command == "gen") return cmd_gen(cfg);
  if (cfg.command == "stats") return cmd_stats(cfg);
  if (cfg.command == "verify") return cmd_verify(cfg);
  throw std::invalid_argument("unknown command " + cfg.command);
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Coordinate-subsampled SVRG solvers for numerically sparse "
               "least squares and top-eigenvector problems"};
  app.require_subcommand(1);
  RunConfig cfg;
  if (const char* env = std::getenv("NSLS_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }

  auto add_common = [&](CLI::App* sub, bool needs_input) {
    if (needs_input)
      sub->add_option("input", cfg.input_path, "MatrixMarket input file")
          ->required();
    sub->add_option("--seed", cfg.seed, "rng seed (default: NSLS_SEED or 1)");
    sub->add_option("--out", cfg.output_path, "report output path");
    sub->add_option("--format", cfg.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
  };

  CLI::App* reg = app.add_subcommand("solve-regression",
                                     "solve min ||Ax-b||^2 by subsampled SVRG");
  add_common(reg, true);
  reg->add_option("--rhs", cfg.rhs_path, "right-hand side vector (.mtx)");
  reg->add_option("--epsilon", cfg.epsilon, "target A^T A-norm error ratio");
  reg->add_flag("--accel", cfg.accel, "approximate proximal point outer loop");
  reg->add_flag("--mu-search", cfg.run_mu_search,
                "find mu by geometric search");
  reg->add_option("--mu", cfg.mu_override, "strong convexity lambda_d(A^T A)");
  reg->add_option("--k", cfg.k_override, "sampling budget parameter override");
  reg->add_option("--accel-lam", cfg.accel_lam_override,
                  "proximal weight override");
  reg->add_option("--max-epochs", cfg.max_epochs, "epoch budget override");

  CLI::App* eig = app.add_subcommand("top-eigenvector",
                                     "approximate top eigenvector of A^T A");
  add_common(eig, true);
  eig->add_option("--epsilon", cfg.epsilon, "quality target")->capture_default_str();
  eig->add_option("--gap", cfg.gap_override, "relative eigengap lower bound");
  eig->add_option("--lambda1", cfg.lambda1_override,
                  "known lambda_1 (skips the shift search)");
  eig->add_flag("--accel", cfg.accel, "accelerated system solves");
  eig->add_option("--accel-gamma", cfg.accel_gamma_override,
                  "proximal weight override");
  eig->add_option("--max-outers", cfg.max_outers,
                  "outer iteration budget override");

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic family");
  add_common(gen, false);
  gen->add_option("--rows", cfg.gen_rows, "rows")->required();
  gen->add_option("--cols", cfg.gen_cols, "columns")->required();
  gen->add_option("--target-s", cfg.gen_target_s, "numerical sparsity target");
  gen->add_option("--row-norm", cfg.gen_row_norm, "row 2-norm");
  gen->add_option("--spectrum", cfg.gen_spectrum, "none|flat|geom");
  gen->add_option("--cond", cfg.gen_cond, "lambda_1/lambda_d for geom");

  CLI::App* stats = app.add_subcommand("stats", "spectral and sparsity stats");
  add_common(stats, true);

  CLI::App* verify =
      app.add_subcommand("verify",
                         "check the sampling estimator guarantees on a matrix");
  add_common(verify, true);
  verify->add_option("--draws", cfg.verify_draws, "Monte Carlo draws");
  verify->add_option("--k", cfg.k_override, "sampling budget parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfigError;
  }

  cfg.command = app.get_subcommands().front()->get_name();
  if (cfg.command == "top-eigenvector" && !eig->count("--epsilon"))
    cfg.epsilon = 1e-3;

  try {
    return dispatch(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace nsls
