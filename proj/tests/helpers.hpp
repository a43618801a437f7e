#pragma once

#include "coxlasso/partial_likelihood.hpp"
#include "coxlasso/sim_config.hpp"
#include "coxlasso/survival_data.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <vector>

namespace testutil {

inline Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline coxlasso::CovariatePath constant_path(const Eigen::VectorXd& z) {
  coxlasso::CovariatePath path;
  path.values = {z};
  return path;
}

inline coxlasso::Subject subject(double start, double end, std::optional<double> event,
                                 coxlasso::CovariatePath path) {
  coxlasso::Subject s;
  s.at_risk_start = start;
  s.at_risk_end = end;
  s.event_time = event;
  s.path = std::move(path);
  return s;
}

// The two-subject hand dataset used for the closed-form likelihood checks:
// z = +-1/2 constant, events at t = 1 and t = 2, so
//   l(beta)      = -(1/2)[ beta/2 - log(e^{beta/2} + e^{-beta/2}) ]
//   grad l(beta) = -(1/4)(1 - tanh(beta/2))
//   D(b1, b2)    = (b1 - b2)(tanh(b1/2) - tanh(b2/2)) / 4.
inline coxlasso::Dataset two_subject_dataset() {
  coxlasso::Dataset d;
  d.p = 1;
  d.k_bound = 1.0;
  d.subjects.push_back(subject(0.0, 1.0, 1.0, constant_path(vec({0.5}))));
  d.subjects.push_back(subject(0.0, 2.0, 2.0, constant_path(vec({-0.5}))));
  return d;
}

inline Eigen::VectorXd fd_gradient(const coxlasso::PartialLikelihood& pl,
                                   const Eigen::VectorXd& beta, double h = 1e-5) {
  Eigen::VectorXd g(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    Eigen::VectorXd up = beta, dn = beta;
    up[j] += h;
    dn[j] -= h;
    g[j] = (pl.value(up) - pl.value(dn)) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(const coxlasso::PartialLikelihood& pl,
                                  const Eigen::VectorXd& beta, double h = 1e-5) {
  Eigen::MatrixXd m(beta.size(), beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    Eigen::VectorXd up = beta, dn = beta;
    up[j] += h;
    dn[j] -= h;
    m.col(j) = (pl.gradient(up) - pl.gradient(dn)) / (2.0 * h);
  }
  return 0.5 * (m + m.transpose());
}

// Kolmogorov-Smirnov distance against U(0, 1).
inline double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double hi = (static_cast<double>(i) + 1.0) / n - u[i];
    const double lo = u[i] - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  return d;
}

inline coxlasso::SimConfig basic_config(int n, int p, std::uint64_t seed) {
  coxlasso::SimConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.beta_true = Eigen::VectorXd::Zero(p);
  cfg.baseline.kind = coxlasso::BaselineHazard::Kind::Constant;
  cfg.baseline.rate = 1.0;
  cfg.censor_rate = 0.3;
  cfg.admin_time = 3.0;
  cfg.covariate_law = coxlasso::CovariateLaw::PiecewiseUniform;
  cfg.jump_rate = 1.0;
  cfg.k_bound = 1.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace testutil
