#pragma once

#include "coxlasso/survival_data.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace coxlasso {

// Raised when a requested risk set is empty, which makes the at-risk average
// undefined. Distinct from generic argument errors so callers can tell a
// structural data problem from a bad parameter.
class empty_risk_set_error : public std::runtime_error {
 public:
  explicit empty_risk_set_error(double t);
  double time;
};

/*
 * At-risk moments at time t under weights exp(Z_i(t)'beta):
 *
 *   r    = (1/n) sum_i Y_i(t) e^{Z_i(t)'beta}
 *   s1   = (1/n) sum_i Z_i(t) Y_i(t) e^{Z_i(t)'beta}
 *   zbar = s1 / r, the weighted at-risk mean covariate
 *   s2   = (1/n) sum_i Z_i(t) Z_i(t)' Y_i(t) e^{Z_i(t)'beta}
 *   v    = sum_i w_i (Z_i - zbar)(Z_i - zbar)',  w_i = Y_i e^{Z_i'beta} / (n r)
 *
 * v equals s2/r - zbar*zbar' algebraically; it is computed in the centered
 * form, which stays positive semidefinite under rounding.
 */
struct RiskSetMoments {
  double r = 0.0;
  Eigen::VectorXd s1;
  Eigen::VectorXd zbar;
  Eigen::MatrixXd s2;
  Eigen::MatrixXd v;
  int at_risk = 0;
};

RiskSetMoments risk_set_moments(const Dataset& d, double t, const Eigen::VectorXd& beta);

/*
 * Average negative log partial likelihood and its derivatives. Sums run over
 * event times only:
 *
 *   l(beta)  = -(1/n) sum_events [ Z_e(t_e)'beta - log sum_i Y_i(t_e) e^{Z_i(t_e)'beta} ]
 *   grad     = -(1/n) sum_events [ Z_e(t_e) - zbar(t_e) ]
 *   hessian  =  (1/n) sum_events v(t_e), symmetric positive semidefinite
 *
 * The log-sum is evaluated after subtracting the max exponent, so large
 * linear predictors do not overflow.
 *
 * Construction caches, per event, the covariate values of the subjects at
 * risk at that event time. Paths enter only through those frozen values, so
 * repeated evaluations (as in the solver loop) cost dense flops, not path
 * lookups. Risk sets are recomputed per event rather than maintained
 * incrementally; with time-dependent covariates an incremental scheme buys
 * nothing and is easy to get wrong.
 */
class PartialLikelihood {
 public:
  explicit PartialLikelihood(const Dataset& d);

  int n() const { return n_; }
  int p() const { return p_; }
  int events() const { return static_cast<int>(events_.size()); }

  double value(const Eigen::VectorXd& beta) const;
  double value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& grad) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

  // Hessian restricted to events with t_e <= t_star. The full Hessian
  // dominates every truncation in the positive semidefinite order.
  Eigen::MatrixXd hessian_up_to(const Eigen::VectorXd& beta, double t_star) const;

  // Symmetric Bregman divergence of l between two points:
  // (b1 - b2)'(grad(b1) - grad(b2)), nonnegative by convexity.
  double bregman(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2) const;

 private:
  struct EventBlock {
    double time;
    Eigen::VectorXd z_event;  // covariate of the subject that fails, at t_e
    Eigen::MatrixXd z_risk;   // rows: covariates of at-risk subjects, at t_e
  };
  void check_beta(const Eigen::VectorXd& beta) const;

  std::vector<EventBlock> events_;  // sorted by time
  int n_ = 0;
  int p_ = 0;
};

// One-shot wrappers for callers that evaluate once.
double neg_log_partial_likelihood(const Dataset& d, const Eigen::VectorXd& beta);
Eigen::VectorXd gradient(const Dataset& d, const Eigen::VectorXd& beta);
Eigen::MatrixXd hessian(const Dataset& d, const Eigen::VectorXd& beta);
double bregman_divergence(const Dataset& d, const Eigen::VectorXd& b1, const Eigen::VectorXd& b2);

}  // namespace coxlasso
