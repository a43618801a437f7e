#pragma once

#include "coxlasso/factors.hpp"
#include "coxlasso/lasso.hpp"
#include "coxlasso/sim_config.hpp"
#include "coxlasso/survival_data.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace coxlasso {

/*
 * The experiments. Each draws replications from a configured data process,
 * measures the quantity an inequality controls, evaluates the inequality's
 * right-hand side from the same replication, and reports violations. The
 * probabilistic statements get a declared Monte Carlo margin (three binomial
 * standard errors); the deterministic ones get a fixed numerical slack.
 *
 *   BasicInequality    penalized-fit error split implied by the optimality
 *                      conditions, plus cone membership of the error
 *   DivergenceSandwich curvature bounds for the symmetric Bregman divergence
 *   ScoreTail          sup-norm tail of the score at the true coefficients
 *   VStatTail          Bernstein tail for squared centered sums
 *   OracleBounds       error bounds with per-replication cone factors
 *   OracleProbability  violation frequency at the tail-derived penalty level
 *   CurvatureFloor     restricted-eigenvalue floor from the population matrix
 *   CurvatureTransfer  factor sandwich between Hessians at nearby points
 */
enum class Experiment {
  BasicInequality,
  DivergenceSandwich,
  ScoreTail,
  VStatTail,
  OracleBounds,
  OracleProbability,
  CurvatureFloor,
  CurvatureTransfer,
};

// Hyphenated names used by config files and the CLI: "basic-inequality",
// "divergence-sandwich", "score-tail", "vstat-tail", "oracle-bounds",
// "oracle-probability", "curvature-floor", "curvature-transfer".
Experiment experiment_from_name(const std::string& name);
std::string experiment_name(Experiment e);
std::vector<std::string> experiment_names();

struct HarnessConfig {
  SimConfig sim;  // data process; sim.seed is the master seed for everything

  double xi = 2.0;
  double eps = 0.01;
  std::vector<double> q_list = {1.0, 2.0};

  std::string lambda_mode = "theoretical";  // "theoretical" | "fixed"
  double lambda_fixed = 0.0;

  double solver_tolerance = 1e-11;
  int solver_max_iterations = 200000;
  int replications = 100;

  // CurvatureFloor
  double t_star = 1.0;
  double m_cap = 2.0;
  int pop_replications = 200;

  // tail experiments; empty grids pick a default bracketing the point where
  // the bound stops being vacuous
  std::vector<double> x_grid;
  std::vector<double> t_grid;
  long long vstat_n = 100;
  std::string vstat_kernel = "centered-uniform";  // | "zero"

  // DivergenceSandwich
  int pairs = 50;
  double pair_scale = 0.5;

  // CurvatureTransfer: directions with |b|_1 = eta_budget / (2 K)
  double eta_budget = 1.0;
  int directions = 10;

  // per-replication factor computations
  int factor_starts = 12;
  long long factor_samples = 20000;
  int factor_local_iterations = 200;

  double resolved_lambda() const;  // theoretical or fixed, validated
  void check() const;
};

// Same key = value format as SimConfig with the harness keys added; unknown
// keys are rejected with the line number.
HarnessConfig harness_config_from_text(const std::string& text,
                                       const std::string& origin = "<string>");
std::string harness_config_to_text(const HarnessConfig& cfg);
HarnessConfig load_harness_config(const std::string& path);

struct ReplicationRecord {
  std::uint64_t seed = 0;

  double lambda = 0.0;
  double z_star = 0.0;     // |grad(beta0)|_inf
  bool qualifies = false;  // z_star <= lambda (xi - 1) / (xi + 1)
  bool cone_ok = false;    // |theta_off|_1 <= xi |theta_on|_1
  bool zero_fit = false;

  Eigen::VectorXd theta;  // beta_hat - beta0
  double d_s = 0.0;       // symmetric Bregman divergence between them
  double l1 = 0.0;
  double l2 = 0.0;
  std::vector<double> lq;  // aligned with config.q_list

  double tau = 0.0;
  double eta = 0.0;
  bool applicable = false;  // tau <= 1/e
  double bregman_bound = 0.0;
  double l1_bound = 0.0;
  std::vector<double> lq_bounds;

  // Factor certificates actually used in this replication's bounds.
  std::optional<FactorReport> kappa;
  std::optional<FactorReport> re;
  std::vector<FactorReport> fq;  // aligned with config.q_list

  // Experiment-specific scalars (e.g. re2, max entry deviation), in a fixed
  // key order within one experiment.
  std::vector<std::pair<std::string, double>> extras;

  std::vector<std::string> violations;
};

struct TailRow {
  std::string label;      // which tail the row belongs to
  double threshold = 0.0;
  double bound = 0.0;     // theoretical bound, possibly > 1 (vacuous)
  long long hits = 0;
  long long trials = 0;
  double frequency = 0.0;
  double allowance = 0.0;  // 3 binomial standard errors at the capped bound
  bool ok = false;         // frequency <= min(bound, 1) + allowance
};

struct ExperimentReport {
  Experiment experiment = Experiment::BasicInequality;
  HarnessConfig config;
  std::vector<ReplicationRecord> records;
  std::vector<TailRow> tails;
  std::vector<std::pair<std::string, double>> stats;  // ordered scalar aggregates
  std::vector<std::string> notes;
  bool pass = false;
};

// Looks up a named aggregate; throws std::out_of_range when missing.
double report_stat(const ExperimentReport& report, const std::string& name);

/*
 * Optimality-condition checks for one fitted replication, as pure arithmetic
 * on measured quantities. With theta = beta_hat - beta0 and z_star the
 * score sup-norm at beta0:
 *
 *   (a) d_s >= -slack
 *   (b) d_s + (lambda - z_star) |theta_off|_1
 *         <= (lambda + z_star) |theta_on|_1 + slack
 *   (c) when z_star <= lambda (xi - 1) / (xi + 1):
 *         |theta_off|_1 <= xi |theta_on|_1 + slack
 *
 * Returns human-readable violation descriptions; empty means all hold.
 */
std::vector<std::string> check_basic_inequality(double d_s, const Eigen::VectorXd& theta,
                                                double z_star, double lambda,
                                                const ConeSpec& cone, double slack = 1e-10);
// Convenience overload that measures d_s and z_star from the data.
std::vector<std::string> check_basic_inequality(const Dataset& d, const Eigen::VectorXd& beta0,
                                                const Eigen::VectorXd& beta_hat, double lambda,
                                                const ConeSpec& cone, double slack = 1e-10);

/*
 * Error-bound check against per-replication factors. Evaluates tau, eta and
 * the three bound families; asserts them against the measured d_s and theta
 * norms only when tau <= 1/e (applicable). fq_values must align with q_list.
 */
struct ErrorBoundCheck {
  double tau = 0.0;
  double eta = 0.0;
  bool applicable = false;
  double bregman_bound = 0.0;
  double l1_bound = 0.0;
  std::vector<double> lq_bounds;
  std::vector<std::string> violations;
};

ErrorBoundCheck check_error_bounds(double d_s, const Eigen::VectorXd& theta, double lambda,
                                   const ConeSpec& cone, double k_bound, double kappa,
                                   const std::vector<double>& fq_values,
                                   const std::vector<double>& q_list, double slack = 1e-10);

// The experiments. threads caps worker parallelism; results are identical
// for every thread count.
ExperimentReport run_basic_inequality(const HarnessConfig& cfg, int threads = 1);
ExperimentReport run_divergence_sandwich(const HarnessConfig& cfg, int threads = 1);
ExperimentReport run_score_tail(const HarnessConfig& cfg, int threads = 1);
ExperimentReport run_vstat_tail(const HarnessConfig& cfg, int threads = 1);
ExperimentReport run_oracle_bounds(const HarnessConfig& cfg, int threads = 1);
ExperimentReport run_oracle_probability(const HarnessConfig& cfg, int threads = 1);
ExperimentReport run_curvature_floor(const HarnessConfig& cfg, int threads = 1);
ExperimentReport run_curvature_transfer(const HarnessConfig& cfg, int threads = 1);

ExperimentReport run_experiment(Experiment e, const HarnessConfig& cfg, int threads = 1);

}  // namespace coxlasso
