#include "coxlasso/scalar_bounds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace coxlasso {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double solve_eta(double tau) {
  const double inv_e = std::exp(-1.0);
  if (!(tau >= 0.0) || tau > inv_e) {
    throw std::domain_error("solve_eta: tau = " + std::to_string(tau) +
                            " outside [0, 1/e]; the bound regime does not apply");
  }
  if (tau == 0.0) return 0.0;
  if (tau == inv_e) return 1.0;
  // eta e^{-eta} increases from 0 to 1/e on [0, 1]; plain bisection.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (mid * std::exp(-mid) < tau) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2.0;
}

double solve_t_npe(long long n, long long p, double eps) {
  if (n < 1 || p < 1) throw std::invalid_argument("solve_t_npe: n and p must be >= 1");
  if (!(eps > 0.0) || !(eps < 1.0)) {
    throw std::invalid_argument("solve_t_npe: eps must lie in (0, 1)");
  }
  const double m = static_cast<double>(p) * static_cast<double>(p + 1);
  const double target = eps / 2.221;
  auto lhs = [&](double t) { return m * std::exp(-static_cast<double>(n) * t * t / (2.0 + 2.0 * t / 3.0)); };
  // lhs decreases from m >= 2 > target at t = 0 to 0; bracket then bisect.
  double lo = 0.0, hi = 1.0;
  while (lhs(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e100) throw std::logic_error("solve_t_npe: failed to bracket the root");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (lhs(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2.0;
}

double ln_rate(long long n, double t) {
  if (n < 1) throw std::invalid_argument("ln_rate: n must be >= 1");
  if (!(t >= 1.0)) throw std::invalid_argument("ln_rate: t must be >= 1");
  return std::sqrt(2.0 * std::log(t) / static_cast<double>(n));
}

double score_tail_bound(long long n, long long p, double x) {
  return 2.0 * static_cast<double>(p) * std::exp(-static_cast<double>(n) * x * x / 2.0);
}

double vstat_tail_bound(long long n, double t) {
  return 2.221 * std::exp(-(static_cast<double>(n) * t * t / 2.0) / (1.0 + t / 3.0));
}

OracleBounds oracle_bounds(double k_bound, double xi, int d_o, double lambda, double kappa) {
  if (!(k_bound >= 0.0)) throw std::invalid_argument("oracle_bounds: K must be >= 0");
  if (!(xi >= 1.0)) throw std::invalid_argument("oracle_bounds: xi must be >= 1");
  if (d_o < 1) throw std::invalid_argument("oracle_bounds: d_o must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("oracle_bounds: lambda must be positive");

  OracleBounds out{kInf, kInf, false, kInf, kInf};
  const double k2 = kappa * kappa;
  if (!(k2 > 0.0)) return out;  // degenerate curvature: regime never applies
  out.tau = k_bound * (xi + 1.0) * static_cast<double>(d_o) * lambda / (2.0 * k2);
  if (out.tau > std::exp(-1.0)) return out;
  out.applicable = true;
  out.eta = solve_eta(out.tau);
  const double e_eta = std::exp(out.eta);
  const double r = 1.0 + 1.0 / xi;
  out.bregman = 4.0 * e_eta * lambda * lambda * static_cast<double>(d_o) / (r * r * k2);
  out.l1 = e_eta * (xi + 1.0) * static_cast<double>(d_o) * lambda / (2.0 * k2);
  return out;
}

double oracle_lq_bound(double eta, double xi, int d_o, double lambda, double f_q, double q) {
  if (!(f_q > 0.0)) return kInf;
  if (!((q >= 1.0 && q <= 2.0) || std::isinf(q))) {
    throw std::invalid_argument("oracle_lq_bound: q must lie in [1, 2] or be inf");
  }
  const double d_pow = std::isinf(q) ? 1.0 : std::pow(static_cast<double>(d_o), 1.0 / q);
  return 2.0 * std::exp(eta) * d_pow * lambda / ((1.0 + 1.0 / xi) * f_q);
}

CurvatureFloor curvature_lower_bound(double rho_star, double r_star, double lambda0_tstar,
                                     int d_o, double xi, double k_bound, long long n, long long p,
                                     double eps) {
  if (!(r_star > 0.0)) throw std::invalid_argument("curvature_lower_bound: r_star must be positive");
  if (!(lambda0_tstar >= 0.0)) {
    throw std::invalid_argument("curvature_lower_bound: Lambda0(t*) must be >= 0");
  }
  if (d_o < 1) throw std::invalid_argument("curvature_lower_bound: d_o must be >= 1");
  if (!(xi >= 1.0)) throw std::invalid_argument("curvature_lower_bound: xi must be >= 1");
  if (!(k_bound >= 0.0)) throw std::invalid_argument("curvature_lower_bound: K must be >= 0");

  CurvatureFloor out{};
  out.rho_star = rho_star;
  out.c1 = 1.0 + lambda0_tstar;
  out.c2 = 2.0 * lambda0_tstar / r_star;
  out.t_npe = solve_t_npe(n, p, eps);
  out.l_n = ln_rate(n, static_cast<double>(p) * static_cast<double>(p + 1) / eps);
  out.deduction = static_cast<double>(d_o) * (xi + 1.0) * (xi + 1.0) * k_bound * k_bound *
                  (out.c1 * out.l_n + out.c2 * out.t_npe * out.t_npe);
  out.bound = rho_star - out.deduction;
  return out;
}

}  // namespace coxlasso
