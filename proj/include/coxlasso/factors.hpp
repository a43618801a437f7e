#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace coxlasso {

/*
 * The cone C(xi, O) = { b : |b_{O^c}|_1 <= xi |b_O|_1 }: directions whose
 * mass off the support index set O is at most xi times the mass on it. All
 * factor quotients below are scale invariant, so minimization runs over the
 * cone intersected with the unit sphere.
 */
struct ConeSpec {
  std::vector<int> support;  // distinct indices into 0..p-1
  double xi = 2.0;           // aperture; >= 1

  void check(int p) const;  // throws std::invalid_argument
};

enum class FactorMethod {
  OrthantExact,   // sign-pattern enumeration with an exact convex solve each
  Multistart,     // best of many projected-descent runs
  SamplingBound,  // a random direction beat every descent run
};

struct FactorReport {
  double value = 0.0;
  Eigen::VectorXd minimizer;  // unit-norm cone direction attaining value
  FactorMethod method = FactorMethod::Multistart;
  // Best quotient seen by pure random sampling minus the reported value.
  // Nonnegative by construction; small means sampling corroborates the
  // optimizer, large means the optimizer found something sampling missed.
  double gap_estimate = 0.0;
};

struct FactorOptions {
  int starts = 50;                 // multistart descent count
  long long samples = 1000000;     // random directions for the envelope
  std::uint64_t seed = 0xC0FFEEULL;
  int max_iterations = 20000;      // FISTA cap per exact orthant solve
  double tolerance = 1e-10;        // gradient-mapping stop for exact solves
  int local_iterations = 400;      // per multistart descent run
  int orthant_limit = 8;           // exact kappa enumeration up to 2^|O| solves
  int re_orthant_limit = 12;       // per-orthant RE up to 2^(p-1) solves
  int threads = 1;
  std::vector<Eigen::VectorXd> hint_starts;  // extra starts, e.g. other minimizers
};

/*
 * Compatibility factor
 *   kappa(xi, O; S) = inf over cone \ {b_O = 0} of
 *                     sqrt(|O|) sqrt(b'Sb) / |b_O|_1.
 * For |O| <= orthant_limit the infimum is solved exactly: fixing the sign
 * pattern of b_O, the quotient's scale invariance pins |b_O|_1 = 1 and the
 * problem becomes a convex QP over (simplex) x (xi-radius l1 ball), solved by
 * FISTA with exact projections. Larger supports fall back to multistart.
 */
FactorReport compatibility_factor(const Eigen::MatrixXd& sigma, const ConeSpec& cone,
                                  const FactorOptions& opts = {});

/*
 * Weak cone invertibility factor
 *   F_q(xi, O; S) = inf over cone of |O|^(1/q) b'Sb / (|b_O|_1 |b|_q),
 * for q in [1, 2] or q = inf. Multistart projected descent plus the sampling
 * envelope; the quotient is nonconvex, so the report carries the sampling gap
 * as the certificate of how hard sampling tried to beat it.
 */
FactorReport weak_cone_invertibility(const Eigen::MatrixXd& sigma, const ConeSpec& cone, double q,
                                     const FactorOptions& opts = {});

/*
 * Restricted eigenvalue
 *   RE(xi, O; S) = inf over cone of sqrt(b'Sb) / |b|_2.
 * For p <= re_orthant_limit every sign orthant is enumerated; within an
 * orthant the cone is convex and projected descent over (cone intersect
 * sphere) is run from several starts. Larger p falls back to multistart over
 * the whole cone.
 */
FactorReport restricted_eigenvalue(const Eigen::MatrixXd& sigma, const ConeSpec& cone,
                                   const FactorOptions& opts = {});

// lq norm for q in [1, inf]; q = inf gives the sup norm.
double lq_norm(const Eigen::VectorXd& b, double q);

// The quotients the factors minimize, exposed so reports can be re-checked
// against their minimizers. Each returns +inf when its denominator vanishes.
double kappa_quotient(const Eigen::MatrixXd& sigma, const ConeSpec& cone,
                      const Eigen::VectorXd& b);
double fq_quotient(const Eigen::MatrixXd& sigma, const ConeSpec& cone, double q,
                   const Eigen::VectorXd& b);
double re_quotient(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& b);

// |b_{O^c}|_1 <= xi |b_O|_1 within slack.
bool in_cone(const ConeSpec& cone, const Eigen::VectorXd& b, double slack = 1e-12);

// Exact Euclidean projections used by the solvers; exposed for tests.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double radius);
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius);
// Projection onto { y >= 0, c'y >= 0 } by dual bisection.
Eigen::VectorXd project_nonneg_halfspace(const Eigen::VectorXd& a, const Eigen::VectorXd& c);
// Projection onto the (sign-symmetric) cone itself: signs are kept, the
// magnitude vector is projected onto the convex section.
Eigen::VectorXd project_cone(const ConeSpec& cone, const Eigen::VectorXd& x);

}  // namespace coxlasso
