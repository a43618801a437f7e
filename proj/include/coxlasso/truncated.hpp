#pragma once

#include "coxlasso/baseline.hpp"
#include "coxlasso/sim_config.hpp"
#include "coxlasso/survival_data.hpp"

#include <Eigen/Core>

namespace coxlasso {

// Hessian of the average negative log partial likelihood restricted to event
// times <= t_star. The full Hessian dominates it in the positive
// semidefinite order.
Eigen::MatrixXd truncated_hessian(const Dataset& d, const Eigen::VectorXd& beta, double t_star);

/*
 * Compensated curvature matrix
 *
 *   (1/n) sum_i int_{(0, t_star]} Y_i(s) e^{Z_i(s)'beta}
 *                 {Z_i(s) - zbar(s)} {Z_i(s) - zbar(s)}' dLambda0(s),
 *
 * with zbar(s) the weighted at-risk mean. It replaces the jump measure of
 * the truncated Hessian by its compensator, which is what concentration
 * arguments compare against. The integrand is a step function of s (paths
 * and risk indicators are step functions), so the integral is evaluated
 * exactly on the union of all at-risk boundaries and path breakpoints.
 */
Eigen::MatrixXd compensated_hessian(const Dataset& d, const Eigen::VectorXd& beta,
                                    const BaselineHazard& baseline, double t_star);

// Same integral with every relative risk capped: weights
// min(m_cap, e^{Z_i(s)'beta}) and the mean taken under the capped weights.
// Capping weights can only shrink the matrix in the positive semidefinite
// order, so compensated_hessian dominates this for every m_cap.
Eigen::MatrixXd weight_truncated_hessian(const Dataset& d, const Eigen::VectorXd& beta,
                                         const BaselineHazard& baseline, double t_star,
                                         double m_cap);

/*
 * Monte Carlo estimate of the population counterpart of the capped matrix:
 * the expectation over a fresh subject of
 *
 *   int_{(0, t_star]} Y(s) min(m_cap, e^{Z(s)'beta})
 *       {Z(s) - mu(s)} {Z(s) - mu(s)}' dLambda0(s),
 *
 * where mu(s) is the population capped-weight mean covariate among subjects
 * at risk at s. mu is estimated from an auxiliary sample as a step function
 * on a thinned grid of observed change points, its hazard-weighted prefix
 * integrals are stored at the grid, and each replication's integral is then
 * exact segment-by-segment arithmetic against those prefixes. sigma is the
 * average over replications, se the entrywise standard error.
 */
struct PopulationSigma {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd se;
  double rho_star = 0.0;       // smallest eigenvalue of sigma
  double r_star = 0.0;         // mean capped at-risk weight at t_star
  int replications = 0;
  long long aux_subjects = 0;  // size of the auxiliary sample behind mu
};

PopulationSigma population_sigma(const SimConfig& cfg, double t_star, double m_cap,
                                 int replications, int threads = 1);

}  // namespace coxlasso
