#pragma once

#include "coxlasso/partial_likelihood.hpp"

#include <Eigen/Core>

#include <vector>

namespace coxlasso {

struct SolverOptions {
  double tolerance = 1e-8;  // sup-norm target for the stationarity residual
  int max_iterations = 50000;
  double initial_step = 1.0;
  double step_shrink = 0.5;          // backtracking multiplier
  double sufficient_decrease = 1e-4; // Armijo constant on the composite objective
  Eigen::VectorXd warm_start;        // empty means start at zero
};

struct FitResult {
  Eigen::VectorXd beta_hat;
  double lambda = 0.0;
  double objective = 0.0;  // l(beta_hat) + lambda |beta_hat|_1
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  SolverOptions options;  // the exact knobs used, kept for reproducibility
};

/*
 * Stationarity residual of the penalized objective at beta:
 *
 *   max_j  | grad_j + lambda sign(beta_j) |        where beta_j != 0
 *          max(0, |grad_j| - lambda)               where beta_j == 0
 *
 * Zero exactly at a minimizer; the solver stops when it drops below
 * tolerance. With lambda = 0 this is just the sup norm of the gradient.
 */
double kkt_residual(const PartialLikelihood& pl, const Eigen::VectorXd& beta, double lambda);
double kkt_residual(const Dataset& d, const Eigen::VectorXd& beta, double lambda);

/*
 * Proximal gradient descent on l(beta) + lambda |beta|_1: a gradient step on
 * l followed by soft thresholding, with backtracking (multiply the step by
 * step_shrink until the composite objective drops by at least
 * sufficient_decrease * |move|^2 / step). The objective is convex, so descent
 * plus the stationarity stopping rule give a global minimizer up to
 * tolerance. Iterates decrease the objective monotonically up to a rounding
 * allowance that keeps the line search from stalling once the per-step
 * decrease falls below the floating point resolution of the objective.
 */
FitResult fit_lasso(const PartialLikelihood& pl, double lambda, const SolverOptions& opts = {});
FitResult fit_lasso(const Dataset& d, double lambda, const SolverOptions& opts = {});

// Fits a strictly decreasing positive lambda sequence, warm starting each fit
// at the previous solution.
std::vector<FitResult> fit_path(const PartialLikelihood& pl, const std::vector<double>& lambdas,
                                const SolverOptions& opts = {});
std::vector<FitResult> fit_path(const Dataset& d, const std::vector<double>& lambdas,
                                const SolverOptions& opts = {});

// Smallest penalty with an all-zero solution: |grad l(0)|_inf.
double lambda_max(const PartialLikelihood& pl);

// Penalty level from the gradient tail bound:
//   ((xi+1)/(xi-1)) * K * sqrt((2/n) log(2p/eps)).
// With this lambda, the event that the fit lands in the aperture-xi cone has
// probability at least 1 - eps.
double theoretical_lambda(int n, int p, double k_bound, double xi, double eps);

}  // namespace coxlasso
