#include "coxlasso/dataset_io.hpp"
#include "coxlasso/factors.hpp"
#include "coxlasso/harness.hpp"
#include "coxlasso/lasso.hpp"
#include "coxlasso/numeric_text.hpp"
#include "coxlasso/partial_likelihood.hpp"
#include "coxlasso/report_io.hpp"
#include "coxlasso/sim_config.hpp"
#include "coxlasso/simulate.hpp"
#include "coxlasso/truncated.hpp"
#include "coxlasso/version.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using namespace coxlasso;
using ordered_json = nlohmann::ordered_json;

// Argument problems detected after CLI11 parsing; mapped to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// "report.json" -> "report.manifest.json"; other names get the suffix whole.
std::string manifest_path(const std::string& out) {
  const std::string ext = ".json";
  if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
    return out.substr(0, out.size() - ext.size()) + ".manifest.json";
  }
  return out + ".manifest.json";
}

std::string csv_sibling(const std::string& out) {
  const std::string ext = ".json";
  if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
    return out.substr(0, out.size() - ext.size()) + ".csv";
  }
  return out + ".csv";
}

Eigen::VectorXd parse_vector(const std::string& csv, const std::string& what) {
  const std::vector<double> vals = parse_double_list(csv, what);
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
  std::vector<int> out;
  std::string tok;
  std::istringstream is(csv);
  while (std::getline(is, tok, ',')) {
    out.push_back(static_cast<int>(parse_int(tok, what)));
  }
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

// Strict per-coordinate bound first; datasets that only satisfy the pairwise
// spread bound are still usable by every inequality, so fall back to that.
Dataset load_validated_dataset(const std::string& path) {
  Dataset d = load_dataset(path);
  ValidationReport strict = validate_dataset(d, false);
  if (strict.ok()) return d;
  ValidationReport pairwise = validate_dataset(d, true);
  if (pairwise.ok()) return d;
  std::string msg = path + ": dataset failed validation:";
  for (const Violation& v : pairwise.violations) msg += "\n  " + v.message;
  throw std::runtime_error(msg);
}

DatasetFormat format_from_name(const std::string& name) {
  if (name == "auto") return DatasetFormat::Auto;
  if (name == "text") return DatasetFormat::Text;
  if (name == "json") return DatasetFormat::Json;
  throw UsageError("unknown dataset format '" + name + "'");
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& format, bool seed_given, std::uint64_t seed) {
  Timer timer;
  SimConfig cfg = load_sim_config(config_path);
  if (seed_given) cfg.seed = seed;
  const Dataset d = simulate_dataset(cfg);
  save_dataset(d, out_path, format_from_name(format));

  RunManifest m;
  m.subcommand = "simulate";
  m.config_text = sim_config_to_text(cfg);
  m.seed = cfg.seed;
  m.inputs = {config_path};
  m.outputs = {out_path};
  m.duration_seconds = timer.seconds();
  write_manifest(m, manifest_path(out_path));
  return 0;
}

int run_loglik(const std::string& dataset_path, const std::string& beta_csv, bool want_grad,
               bool want_hess) {
  const Dataset d = load_validated_dataset(dataset_path);
  const Eigen::VectorXd beta = parse_vector(beta_csv, "--beta");
  if (beta.size() != d.p) {
    throw std::runtime_error("--beta has " + std::to_string(beta.size()) + " entries, dataset has p=" +
                             std::to_string(d.p));
  }
  const PartialLikelihood pl(d);
  ordered_json out;
  out["value"] = json_num(pl.value(beta));
  if (want_grad) {
    const Eigen::VectorXd g = pl.gradient(beta);
    ordered_json gj = ordered_json::array();
    for (Eigen::Index j = 0; j < g.size(); ++j) gj.push_back(json_num(g[j]));
    out["gradient"] = std::move(gj);
  }
  if (want_hess) {
    const Eigen::MatrixXd h = pl.hessian(beta);
    ordered_json hj = ordered_json::array();
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index j = 0; j < h.cols(); ++j) row.push_back(json_num(h(i, j)));
      hj.push_back(std::move(row));
    }
    out["hessian"] = std::move(hj);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_fit(const std::string& dataset_path, bool lambda_given, double lambda, bool theoretical,
            double xi, double eps, double tol, int max_iter, const std::string& out_path) {
  Timer timer;
  if (lambda_given == theoretical) {
    throw UsageError("fit needs exactly one of --lambda and --theoretical");
  }
  const Dataset d = load_validated_dataset(dataset_path);
  const PartialLikelihood pl(d);
  const double lam =
      lambda_given ? lambda : theoretical_lambda(d.n(), d.p, d.k_bound, xi, eps);

  SolverOptions opts;
  opts.tolerance = tol;
  opts.max_iterations = max_iter;
  const FitResult fit = fit_lasso(pl, lam, opts);

  ordered_json doc;
  doc["version"] = kVersion;
  doc["dataset"] = dataset_path;
  doc["n"] = d.n();
  doc["p"] = d.p;
  doc["k_bound"] = json_num(d.k_bound);
  doc["lambda_mode"] = lambda_given ? "fixed" : "theoretical";
  if (!lambda_given) {
    doc["xi"] = json_num(xi);
    doc["eps"] = json_num(eps);
  }
  const ordered_json fit_doc = fit_to_json(fit);
  for (const auto& [key, value] : fit_doc.items()) doc[key] = value;
  write_text_file(out_path, doc.dump(2) + "\n");

  RunManifest m;
  m.subcommand = "fit";
  m.config_text = "dataset = " + dataset_path + "\nlambda_mode = " +
                  (lambda_given ? std::string("fixed") : std::string("theoretical")) +
                  "\nlambda = " + format_double(lam) + "\nxi = " + format_double(xi) +
                  "\neps = " + format_double(eps) + "\ntolerance = " + format_double(tol) +
                  "\nmax_iterations = " + std::to_string(max_iter) + "\n";
  m.inputs = {dataset_path};
  m.outputs = {out_path};
  m.duration_seconds = timer.seconds();
  write_manifest(m, manifest_path(out_path));
  return 0;
}

int run_path(const std::string& dataset_path, const std::string& grid_csv, int auto_points,
             double tol, int max_iter, const std::string& out_path) {
  Timer timer;
  if (grid_csv.empty() == (auto_points == 0)) {
    throw UsageError("path needs exactly one of --grid and --auto");
  }
  const Dataset d = load_validated_dataset(dataset_path);
  const PartialLikelihood pl(d);

  std::vector<double> grid;
  if (!grid_csv.empty()) {
    grid = parse_double_list(grid_csv, "--grid");
  } else {
    if (auto_points < 2) throw UsageError("--auto needs at least 2 points");
    const double top = lambda_max(pl);
    const double ratio = 0.01;
    for (int i = 0; i < auto_points; ++i) {
      grid.push_back(top * std::pow(ratio, static_cast<double>(i) /
                                               static_cast<double>(auto_points - 1)));
    }
  }

  SolverOptions opts;
  opts.tolerance = tol;
  opts.max_iterations = max_iter;
  const std::vector<FitResult> fits = fit_path(pl, grid, opts);

  ordered_json doc;
  doc["version"] = kVersion;
  doc["dataset"] = dataset_path;
  doc["n"] = d.n();
  doc["p"] = d.p;
  ordered_json arr = ordered_json::array();
  for (const FitResult& fit : fits) arr.push_back(fit_to_json(fit));
  doc["fits"] = std::move(arr);
  write_text_file(out_path, doc.dump(2) + "\n");

  std::string csv = "lambda,objective,kkt_residual,iterations,converged,nonzeros";
  for (int j = 0; j < d.p; ++j) csv += ",beta_" + std::to_string(j);
  csv += "\n";
  for (const FitResult& fit : fits) {
    int nz = 0;
    for (Eigen::Index j = 0; j < fit.beta_hat.size(); ++j) nz += fit.beta_hat[j] != 0.0 ? 1 : 0;
    csv += format_double(fit.lambda) + "," + format_double(fit.objective) + "," +
           format_double(fit.kkt_residual) + "," + std::to_string(fit.iterations) + "," +
           (fit.converged ? "1" : "0") + "," + std::to_string(nz);
    for (Eigen::Index j = 0; j < fit.beta_hat.size(); ++j) {
      csv += "," + format_double(fit.beta_hat[j]);
    }
    csv += "\n";
  }
  const std::string csv_path = csv_sibling(out_path);
  write_text_file(csv_path, csv);

  RunManifest m;
  m.subcommand = "path";
  std::string lambdas;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) lambdas += ",";
    lambdas += format_double(grid[i]);
  }
  m.config_text = "dataset = " + dataset_path + "\nlambdas = " + lambdas +
                  "\ntolerance = " + format_double(tol) +
                  "\nmax_iterations = " + std::to_string(max_iter) + "\n";
  m.inputs = {dataset_path};
  m.outputs = {out_path, csv_path};
  m.duration_seconds = timer.seconds();
  write_manifest(m, manifest_path(out_path));
  return 0;
}

int run_factors(const std::string& sigma_path, const std::string& dataset_path,
                const std::string& beta_csv, bool tstar_given, double tstar, bool mcap_given,
                double mcap, const std::string& baseline_config, const std::string& support_csv,
                double xi, const std::string& q_csv, int starts, long long samples,
                std::uint64_t seed, int threads, const std::string& out_path) {
  Timer timer;
  if (sigma_path.empty() == dataset_path.empty()) {
    throw UsageError("factors needs exactly one of --sigma and --dataset");
  }
  if (mcap_given && (!tstar_given || baseline_config.empty())) {
    throw UsageError("--mcap needs --tstar and --baseline-config for the known-baseline matrix");
  }

  Eigen::MatrixXd sigma;
  std::string source;
  std::vector<std::string> inputs;
  if (!sigma_path.empty()) {
    sigma = load_matrix(sigma_path);
    source = "matrix file " + sigma_path;
    inputs.push_back(sigma_path);
  } else {
    const Dataset d = load_validated_dataset(dataset_path);
    inputs.push_back(dataset_path);
    const Eigen::VectorXd b =
        beta_csv.empty() ? Eigen::VectorXd::Zero(d.p).eval() : parse_vector(beta_csv, "--beta");
    if (b.size() != d.p) {
      throw std::runtime_error("--beta has " + std::to_string(b.size()) + " entries, dataset has p=" +
                               std::to_string(d.p));
    }
    if (mcap_given) {
      const SimConfig cfg = load_sim_config(baseline_config);
      inputs.push_back(baseline_config);
      sigma = weight_truncated_hessian(d, b, cfg.baseline, tstar, mcap);
      source = "weight-truncated curvature of " + dataset_path;
    } else if (tstar_given) {
      sigma = PartialLikelihood(d).hessian_up_to(b, tstar);
      source = "curvature of " + dataset_path + " up to t=" + format_double(tstar);
    } else {
      sigma = PartialLikelihood(d).hessian(b);
      source = "curvature of " + dataset_path;
    }
  }

  const std::vector<int> support = parse_int_list(support_csv, "--support");
  const ConeSpec cone{support, xi};
  cone.check(static_cast<int>(sigma.rows()));
  const std::vector<double> qs = parse_double_list(q_csv, "--q");

  FactorOptions opts;
  opts.starts = starts;
  opts.samples = samples;
  opts.seed = seed;
  opts.threads = threads;

  const FactorReport kappa = compatibility_factor(sigma, cone, opts);
  const FactorReport re = restricted_eigenvalue(sigma, cone, opts);
  FactorOptions fq_opts = opts;
  fq_opts.hint_starts.push_back(kappa.minimizer);

  ordered_json doc;
  doc["version"] = kVersion;
  doc["source"] = source;
  doc["p"] = static_cast<int>(sigma.rows());
  doc["support"] = support;
  doc["xi"] = json_num(xi);
  doc["kappa"] = factor_to_json(kappa);
  doc["re"] = factor_to_json(re);
  ordered_json fq = ordered_json::array();
  for (double q : qs) {
    ordered_json entry;
    entry["q"] = json_num(q);
    const ordered_json fj = factor_to_json(weak_cone_invertibility(sigma, cone, q, fq_opts));
    for (const auto& [key, value] : fj.items()) entry[key] = value;
    fq.push_back(std::move(entry));
  }
  doc["fq"] = std::move(fq);

  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return 0;
  }
  write_text_file(out_path, doc.dump(2) + "\n");

  RunManifest m;
  m.subcommand = "factors";
  m.config_text = "source = " + source + "\nsupport = " + support_csv +
                  "\nxi = " + format_double(xi) + "\nq = " + q_csv +
                  "\nstarts = " + std::to_string(starts) +
                  "\nsamples = " + std::to_string(samples) +
                  "\nseed = " + std::to_string(seed) + "\n";
  m.seed = seed;
  m.inputs = inputs;
  m.outputs = {out_path};
  m.duration_seconds = timer.seconds();
  write_manifest(m, manifest_path(out_path));
  return 0;
}

int run_verify(const std::string& experiment, const std::string& config_path, int reps,
               bool seed_given, std::uint64_t seed, int threads, const std::string& out_path) {
  Timer timer;
  const Experiment e = experiment_from_name(experiment);
  HarnessConfig cfg = load_harness_config(config_path);
  if (reps > 0) cfg.replications = reps;
  if (seed_given) cfg.sim.seed = seed;

  const ExperimentReport report = run_experiment(e, cfg, threads);

  write_text_file(out_path, experiment_to_json(report).dump(2) + "\n");
  const std::string csv_path = csv_sibling(out_path);
  write_text_file(csv_path, experiment_to_csv(report));

  RunManifest m;
  m.subcommand = "verify";
  m.config_text = "experiment = " + experiment + "\n" + harness_config_to_text(report.config);
  m.seed = report.config.sim.seed;
  m.inputs = {config_path};
  m.outputs = {out_path, csv_path};
  m.duration_seconds = timer.seconds();
  write_manifest(m, manifest_path(out_path));

  if (!report.pass) {
    std::cerr << "experiment " << experiment << " failed; see " << out_path << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cox lasso toolkit: simulation, penalized fitting, cone factors, and "
               "Monte Carlo checks of the finite-sample error bounds"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker thread cap; results are identical for any value")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a dataset from a configured hazard model");
  sim->fallthrough();
  std::string sim_config, sim_out;
  std::string sim_format = "auto";
  std::uint64_t sim_seed = 0;
  sim->add_option("--config", sim_config, "Simulation config file")->required();
  sim->add_option("--out", sim_out, "Dataset output path")->required();
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Override the config seed");
  sim->add_option("--format", sim_format, "Output format: auto, text, json")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "text", "json"}));

  // loglik
  auto* lk = app.add_subcommand("loglik", "Evaluate the negative log partial likelihood");
  lk->fallthrough();
  std::string lk_dataset, lk_beta;
  bool lk_grad = false, lk_hess = false;
  lk->add_option("--dataset", lk_dataset, "Dataset file")->required();
  lk->add_option("--beta", lk_beta, "Coefficients, comma-separated")->required();
  lk->add_flag("--grad", lk_grad, "Also print the gradient");
  lk->add_flag("--hess", lk_hess, "Also print the Hessian");

  // fit
  auto* fit = app.add_subcommand("fit", "Solve the l1-penalized partial likelihood");
  fit->fallthrough();
  std::string fit_dataset, fit_out;
  double fit_lambda = 0.0, fit_xi = 2.0, fit_eps = 0.01, fit_tol = 1e-8;
  int fit_max_iter = 50000;
  bool fit_theoretical = false;
  fit->add_option("--dataset", fit_dataset, "Dataset file")->required();
  auto* fit_lambda_opt = fit->add_option("--lambda", fit_lambda, "Penalty level");
  fit->add_flag("--theoretical", fit_theoretical,
                "Use the tail-derived penalty for the dataset's n, p, K");
  fit->add_option("--xi", fit_xi, "Cone opening for the theoretical penalty")
      ->capture_default_str();
  fit->add_option("--eps", fit_eps, "Tail probability for the theoretical penalty")
      ->capture_default_str();
  fit->add_option("--tol", fit_tol, "KKT tolerance")->capture_default_str();
  fit->add_option("--max-iter", fit_max_iter, "Iteration cap")->capture_default_str();
  fit->add_option("--out", fit_out, "Report output path")->required();

  // path
  auto* path = app.add_subcommand("path", "Fit along a penalty grid with warm starts");
  path->fallthrough();
  std::string path_dataset, path_grid, path_out;
  int path_auto = 0, path_max_iter = 50000;
  double path_tol = 1e-8;
  path->add_option("--dataset", path_dataset, "Dataset file")->required();
  path->add_option("--grid", path_grid, "Penalty levels, comma-separated");
  path->add_option("--auto", path_auto,
                   "Geometric grid size from the all-zero penalty down two decades");
  path->add_option("--tol", path_tol, "KKT tolerance")->capture_default_str();
  path->add_option("--max-iter", path_max_iter, "Iteration cap")->capture_default_str();
  path->add_option("--out", path_out, "Report output path")->required();

  // factors
  auto* fac = app.add_subcommand("factors", "Compute cone quantities of a curvature matrix");
  fac->fallthrough();
  std::string fac_sigma, fac_dataset, fac_beta, fac_baseline, fac_support, fac_q = "1,2";
  std::string fac_out;
  double fac_xi = 2.0, fac_tstar = 0.0, fac_mcap = 0.0;
  int fac_starts = 50;
  long long fac_samples = 1000000;
  std::uint64_t fac_seed = 0xC0FFEE;
  fac->add_option("--sigma", fac_sigma, "Matrix file (one row per line, space-separated)");
  fac->add_option("--dataset", fac_dataset, "Dataset file (curvature evaluated from it)");
  fac->add_option("--beta", fac_beta, "Evaluation point for the curvature, comma-separated");
  auto* fac_tstar_opt = fac->add_option("--tstar", fac_tstar, "Truncate curvature at this time");
  auto* fac_mcap_opt =
      fac->add_option("--mcap", fac_mcap, "Weight cap for the known-baseline matrix");
  fac->add_option("--baseline-config", fac_baseline,
                  "Simulation config supplying the baseline for --mcap");
  fac->add_option("--support", fac_support, "Support indices, comma-separated")->required();
  fac->add_option("--xi", fac_xi, "Cone opening")->required();
  fac->add_option("--q", fac_q, "Norm orders for the invertibility factor")
      ->capture_default_str();
  fac->add_option("--starts", fac_starts, "Multistart count")->capture_default_str();
  fac->add_option("--samples", fac_samples, "Sampling certificate size")->capture_default_str();
  fac->add_option("--seed", fac_seed, "Seed for multistart and sampling")->capture_default_str();
  fac->add_option("--out", fac_out, "Report output path (stdout when omitted)");

  // verify
  auto* ver = app.add_subcommand("verify", "Run one Monte Carlo experiment against its bound");
  ver->fallthrough();
  std::string ver_experiment, ver_config, ver_out;
  int ver_reps = 0;
  std::uint64_t ver_seed = 0;
  ver->add_option("--experiment", ver_experiment, "One of: basic-inequality, divergence-sandwich, "
                  "score-tail, vstat-tail, oracle-bounds, oracle-probability, curvature-floor, "
                  "curvature-transfer")
      ->required()
      ->check(CLI::IsMember(experiment_names()));
  ver->add_option("--config", ver_config, "Harness config file")->required();
  ver->add_option("--reps", ver_reps, "Override the config replication count");
  auto* ver_seed_opt = ver->add_option("--seed", ver_seed, "Override the config seed");
  ver->add_option("--out", ver_out, "Report output path (.csv sibling written too)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return run_simulate(sim_config, sim_out, sim_format, sim_seed_opt->count() > 0, sim_seed);
    }
    if (lk->parsed()) {
      return run_loglik(lk_dataset, lk_beta, lk_grad, lk_hess);
    }
    if (fit->parsed()) {
      return run_fit(fit_dataset, fit_lambda_opt->count() > 0, fit_lambda, fit_theoretical,
                     fit_xi, fit_eps, fit_tol, fit_max_iter, fit_out);
    }
    if (path->parsed()) {
      return run_path(path_dataset, path_grid, path_auto, path_tol, path_max_iter, path_out);
    }
    if (fac->parsed()) {
      return run_factors(fac_sigma, fac_dataset, fac_beta, fac_tstar_opt->count() > 0, fac_tstar,
                         fac_mcap_opt->count() > 0, fac_mcap, fac_baseline, fac_support, fac_xi,
                         fac_q, fac_starts, fac_samples, fac_seed, threads, fac_out);
    }
    if (ver->parsed()) {
      return run_verify(ver_experiment, ver_config, ver_reps, ver_seed_opt->count() > 0, ver_seed,
                        threads, ver_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand selected\n";
  return 2;
}
