#pragma once

namespace coxlasso {

// Smaller root of eta * exp(-eta) = tau, which lies in [0, 1] for
// tau in [0, 1/e]. Exact at the ends: 0 -> 0 and 1/e -> 1. Throws
// std::domain_error outside [0, 1/e].
double solve_eta(double tau);

// Unique positive root t of  p (p + 1) exp{-n t^2 / (2 + 2 t / 3)} = eps / 2.221,
// the threshold at which a Bernstein-type tail, union-bounded over the
// p (p + 1) matrix entries, reaches level eps.
double solve_t_npe(long long n, long long p, double eps);

// sqrt((2 / n) log t), the sub-Gaussian rate for a union bound over t terms.
// Requires t >= 1.
double ln_rate(long long n, double t);

// Tail bound for the sup-norm of the score at the true coefficients:
// P{ |grad(beta0)|_inf > K x } <= 2 p exp(-n x^2 / 2).
double score_tail_bound(long long n, long long p, double x);

// Bernstein tail for a centered square-of-sum statistic with kernel bounded
// by 1: P{ +-V > (n t)^2 } <= 2.221 exp{-(n t^2 / 2) / (1 + t / 3)}.
double vstat_tail_bound(long long n, double t);

/*
 * Right-hand sides of the estimation error bounds at penalty level lambda,
 * cone opening xi, support size d_o, and compatibility factor kappa taken at
 * the relevant curvature matrix:
 *
 *   tau     = K (xi + 1) d_o lambda / (2 kappa^2)
 *   eta     = smaller root of eta e^{-eta} = tau        (requires tau <= 1/e)
 *   bregman = 4 e^eta (1 + 1/xi)^{-2} lambda^2 d_o / kappa^2
 *   l1      = e^eta (xi + 1) d_o lambda / (2 kappa^2)
 *
 * When tau > 1/e the regime assumption fails: applicable is false and eta
 * and the bounds stay infinite. Callers report such replications separately
 * instead of asserting anything.
 */
struct OracleBounds {
  double tau;
  double eta;
  bool applicable;
  double bregman;
  double l1;
};

OracleBounds oracle_bounds(double k_bound, double xi, int d_o, double lambda, double kappa);

// Companion lq error bound, q in [1, 2] or infinity:
// 2 e^eta (1 + 1/xi)^{-1} d_o^{1/q} lambda / f_q  (d_o^{1/q} read as 1 at q = inf).
double oracle_lq_bound(double eta, double xi, int d_o, double lambda, double f_q, double q);

/*
 * Lower bound for the restricted eigenvalue (squared) of the Hessian at the
 * true coefficients in terms of the population curvature matrix:
 *
 *   bound = rho_star - d_o (xi + 1)^2 K^2 { C1 Ln(p (p + 1) / eps) + C2 t^2 }
 *   C1 = 1 + Lambda0(t*),  C2 = (2 / r_star) Lambda0(t*),
 *   Ln = ln_rate(n, .),    t  = solve_t_npe(n, p, eps).
 *
 * bound can be negative (small n), in which case the inequality it feeds is
 * vacuously true; callers flag that rather than suppress it.
 */
struct CurvatureFloor {
  double rho_star;
  double c1;
  double c2;
  double t_npe;
  double l_n;
  double deduction;
  double bound;
};

CurvatureFloor curvature_lower_bound(double rho_star, double r_star, double lambda0_tstar,
                                     int d_o, double xi, double k_bound, long long n, long long p,
                                     double eps);

}  // namespace coxlasso
