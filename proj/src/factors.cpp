#include "coxlasso/factors.hpp"

#include "coxlasso/parallel.hpp"
#include "coxlasso/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace coxlasso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void ConeSpec_check(const ConeSpec& cone, int p) { cone.check(p); }

Eigen::MatrixXd checked_sigma(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw std::invalid_argument("factors: sigma must be square and nonempty");
  }
  if (!sigma.allFinite()) throw std::invalid_argument("factors: sigma must be finite");
  Eigen::MatrixXd s = (sigma + sigma.transpose()) / 2.0;
  const double eig_min =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  if (eig_min < -1e-8) {
    throw std::invalid_argument("factors: sigma is not positive semidefinite (min eigenvalue " +
                                std::to_string(eig_min) + ")");
  }
  return s;
}

double quad_form(const Eigen::MatrixXd& s, const Eigen::VectorXd& b) {
  return std::max(0.0, b.dot(s * b));
}

double support_l1(const ConeSpec& cone, const Eigen::VectorXd& b) {
  double acc = 0.0;
  for (int j : cone.support) acc += std::abs(b[j]);
  return acc;
}

double off_support_l1(const ConeSpec& cone, const Eigen::VectorXd& b) {
  return b.lpNorm<1>() - support_l1(cone, b);
}

// c'y >= 0 encodes the cone inequality for magnitude vectors y = |b|.
Eigen::VectorXd cone_normal(const ConeSpec& cone, int p) {
  Eigen::VectorXd c = Eigen::VectorXd::Constant(p, -1.0);
  for (int j : cone.support) c[j] = cone.xi;
  return c;
}

}  // namespace

double lq_norm(const Eigen::VectorXd& b, double q) {
  if (q == 1.0) return b.lpNorm<1>();
  if (q == 2.0) return b.norm();
  if (std::isinf(q)) return b.lpNorm<Eigen::Infinity>();
  if (!(q > 1.0)) throw std::invalid_argument("lq_norm: q must be >= 1");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) acc += std::pow(std::abs(b[j]), q);
  return std::pow(acc, 1.0 / q);
}

void ConeSpec::check(int p) const {
  if (support.empty()) throw std::invalid_argument("cone: support must be nonempty");
  if (!(xi >= 1.0) || !std::isfinite(xi)) {
    throw std::invalid_argument("cone: xi must be finite and >= 1");
  }
  std::vector<int> s = support;
  std::sort(s.begin(), s.end());
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < 0 || s[k] >= p) throw std::invalid_argument("cone: support index out of range");
    if (k > 0 && s[k] == s[k - 1]) throw std::invalid_argument("cone: duplicate support index");
  }
}

double kappa_quotient(const Eigen::MatrixXd& sigma, const ConeSpec& cone,
                      const Eigen::VectorXd& b) {
  const double den = support_l1(cone, b);
  if (!(den > 0.0)) return kInf;
  return std::sqrt(static_cast<double>(cone.support.size()) * quad_form(sigma, b)) / den;
}

double fq_quotient(const Eigen::MatrixXd& sigma, const ConeSpec& cone, double q,
                   const Eigen::VectorXd& b) {
  const double d1 = support_l1(cone, b);
  const double dq = lq_norm(b, q);
  if (!(d1 > 0.0) || !(dq > 0.0)) return kInf;
  const double d_o = static_cast<double>(cone.support.size());
  const double coef = std::isinf(q) ? 1.0 : std::pow(d_o, 1.0 / q);
  return coef * quad_form(sigma, b) / (d1 * dq);
}

double re_quotient(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& b) {
  const double den = b.norm();
  if (!(den > 0.0)) return kInf;
  return std::sqrt(quad_form(sigma, b)) / den;
}

bool in_cone(const ConeSpec& cone, const Eigen::VectorXd& b, double slack) {
  return off_support_l1(cone, b) <= cone.xi * support_l1(cone, b) + slack;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double radius) {
  const Eigen::Index m = v.size();
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double tau = (u.empty() ? 0.0 : u[0]) - radius;
  for (Eigen::Index k = 0; k < m; ++k) {
    cum += u[static_cast<std::size_t>(k)];
    const double t = (cum - radius) / static_cast<double>(k + 1);
    if (u[static_cast<std::size_t>(k)] > t) tau = t;
  }
  return v.unaryExpr([tau](double x) { return std::max(x - tau, 0.0); });
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
  if (radius <= 0.0) return Eigen::VectorXd::Zero(v.size());
  if (v.lpNorm<1>() <= radius) return v;
  const Eigen::VectorXd mags = project_simplex(v.cwiseAbs(), radius);
  Eigen::VectorXd out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) out[j] = v[j] >= 0.0 ? mags[j] : -mags[j];
  return out;
}

Eigen::VectorXd project_nonneg_halfspace(const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
  auto clip = [&](double mu) {
    return Eigen::VectorXd((a + mu * c).cwiseMax(0.0));
  };
  Eigen::VectorXd y = clip(0.0);
  if (c.dot(y) >= 0.0) return y;
  // KKT: y(mu) = max(a + mu c, 0) with the smallest mu >= 0 making c'y = 0.
  // c'y(mu) is nondecreasing and reaches +inf (the support coordinates have
  // positive c), so bisection closes in on the root.
  double lo = 0.0, hi = 1.0;
  while (c.dot(clip(hi)) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e100) throw std::logic_error("project_nonneg_halfspace: unbounded dual search");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (c.dot(clip(mid)) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return clip(hi);  // feasible side of the root
}

Eigen::VectorXd project_cone(const ConeSpec& cone, const Eigen::VectorXd& x) {
  // Feasibility depends only on |b| and the best sign for each coordinate is
  // the sign of x, so projecting the magnitudes onto the convex section is
  // the exact projection onto the (nonconvex) cone.
  const Eigen::VectorXd c = cone_normal(cone, static_cast<int>(x.size()));
  const Eigen::VectorXd mags = project_nonneg_halfspace(x.cwiseAbs(), c);
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = x[j] >= 0.0 ? mags[j] : -mags[j];
  return out;
}

namespace {

// ----- generic multistart machinery ------------------------------------

// One projected-descent run for a scale-invariant quotient over the cone
// intersected with the unit sphere. Backtracking: shrink on failure, modest
// growth on success. Subgradient kinks and the nonconvex feasible set are
// handled by the multistart envelope around this, not by the local rule.
Eigen::VectorXd local_descent(const std::function<double(const Eigen::VectorXd&)>& f,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& project,
                              Eigen::VectorXd b, int iterations) {
  b = project(b);
  if (b.size() == 0) return b;
  double fb = f(b);
  double step = 0.25;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd g = grad(b);
    bool accepted = false;
    for (int trial = 0; trial < 40 && step > 1e-18; ++trial) {
      const Eigen::VectorXd cand = project(b - step * g);
      if (cand.size() == 0) {
        step *= 0.5;
        continue;
      }
      const double fc = f(cand);
      if (fc < fb - 1e-16 * (1.0 + std::abs(fb))) {
        b = cand;
        fb = fc;
        accepted = true;
        step *= 1.3;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return b;
}

struct Candidate {
  double value = kInf;
  Eigen::VectorXd b;
};

void take_better(Candidate& best, double value, const Eigen::VectorXd& b) {
  if (value < best.value) {
    best.value = value;
    best.b = b;
  }
}

// Random cone direction: normal mass on the support, off-support mass at a
// uniform fraction of the allowed budget. Covers the boundary and interior.
Eigen::VectorXd draw_cone_point(CounterRng& rng, int p, const ConeSpec& cone) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  double l1_on = 0.0;
  for (int j : cone.support) {
    b[j] = rng.normal();
    l1_on += std::abs(b[j]);
  }
  if (l1_on == 0.0) {
    b[cone.support.front()] = 1.0;
    l1_on = 1.0;
  }
  const auto d_o = static_cast<int>(cone.support.size());
  if (p > d_o) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    double l1_off = 0.0;
    std::vector<char> on(static_cast<std::size_t>(p), 0);
    for (int j : cone.support) on[static_cast<std::size_t>(j)] = 1;
    for (int j = 0; j < p; ++j) {
      if (on[static_cast<std::size_t>(j)]) continue;
      g[j] = rng.normal();
      l1_off += std::abs(g[j]);
    }
    const double budget = rng.uniform01() * cone.xi * l1_on;
    if (l1_off > 0.0) b += g * (budget / l1_off);
  }
  b.normalize();
  return b;
}

// Pure random-direction envelope, evaluated in fixed-size blocks so the
// result is identical for any thread count.
Candidate sampling_envelope(const std::function<double(const Eigen::VectorXd&)>& f, int p,
                            const ConeSpec& cone, long long samples, std::uint64_t seed,
                            int threads) {
  Candidate best;
  if (samples <= 0) return best;
  constexpr long long kBlock = 4096;
  const auto blocks = static_cast<std::size_t>((samples + kBlock - 1) / kBlock);
  std::vector<Candidate> per_block(blocks);
  parallel_for(blocks, threads, [&](std::size_t bi) {
    CounterRng rng(seed, derive_stream(0x5a3c, bi));
    const long long lo = static_cast<long long>(bi) * kBlock;
    const long long hi = std::min(samples, lo + kBlock);
    Candidate local;
    for (long long k = lo; k < hi; ++k) {
      const Eigen::VectorXd b = draw_cone_point(rng, p, cone);
      take_better(local, f(b), b);
    }
    per_block[bi] = std::move(local);
  });
  for (const Candidate& c : per_block) {
    if (c.b.size() > 0) take_better(best, c.value, c.b);
  }
  return best;
}

// Subgradient of |.|_q; zero coordinates get subgradient entry 0.
Eigen::VectorXd lq_subgrad(const Eigen::VectorXd& b, double q) {
  const Eigen::Index p = b.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
  if (q == 1.0) {
    for (Eigen::Index j = 0; j < p; ++j) g[j] = b[j] > 0.0 ? 1.0 : (b[j] < 0.0 ? -1.0 : 0.0);
    return g;
  }
  if (std::isinf(q)) {
    Eigen::Index arg = 0;
    b.cwiseAbs().maxCoeff(&arg);
    g[arg] = b[arg] >= 0.0 ? 1.0 : -1.0;
    return g;
  }
  const double nq = lq_norm(b, q);
  if (!(nq > 0.0)) return g;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (b[j] == 0.0) continue;
    g[j] = std::pow(std::abs(b[j]) / nq, q - 1.0) * (b[j] > 0.0 ? 1.0 : -1.0);
  }
  return g;
}

Eigen::VectorXd support_sign(const ConeSpec& cone, const Eigen::VectorXd& b) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(b.size());
  for (int j : cone.support) g[j] = b[j] > 0.0 ? 1.0 : (b[j] < 0.0 ? -1.0 : 0.0);
  return g;
}

// Structured starts shared by the multistart minimizers.
std::vector<Eigen::VectorXd> structured_starts(const Eigen::MatrixXd& sigma, const ConeSpec& cone,
                                               const FactorOptions& opts) {
  const int p = static_cast<int>(sigma.rows());
  const auto d_o = static_cast<int>(cone.support.size());
  std::vector<Eigen::VectorXd> starts;

  // Uniform magnitude on the support, all sign patterns when that is cheap.
  if (d_o <= 6) {
    for (int mask = 0; mask < (1 << (d_o - 1)); ++mask) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
      for (int k = 0; k < d_o; ++k) {
        const bool neg = k > 0 && ((mask >> (k - 1)) & 1);
        b[cone.support[static_cast<std::size_t>(k)]] = neg ? -1.0 : 1.0;
      }
      starts.push_back(b.normalized());
    }
  } else {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (int j : cone.support) b[j] = 1.0;
    starts.push_back(b.normalized());
  }
  // Support coordinate directions.
  for (int j : cone.support) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    b[j] = 1.0;
    starts.push_back(b);
  }
  // Smallest eigenvector folded into the cone.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  Eigen::VectorXd vmin = eig.eigenvectors().col(0);
  starts.push_back(vmin);
  // Caller-provided hints (e.g. the minimizer of a related factor).
  for (const auto& h : opts.hint_starts) {
    if (h.size() == p && h.norm() > 0.0) starts.push_back(h.normalized());
  }
  return starts;
}

Candidate multistart_minimize(const Eigen::MatrixXd& sigma, const ConeSpec& cone,
                              const FactorOptions& opts,
                              const std::function<double(const Eigen::VectorXd&)>& f,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad) {
  const int p = static_cast<int>(sigma.rows());
  auto project = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd y = project_cone(cone, x);
    const double norm = y.norm();
    if (!(norm > 1e-300)) return Eigen::VectorXd();
    return y / norm;
  };

  std::vector<Eigen::VectorXd> starts = structured_starts(sigma, cone, opts);
  {
    CounterRng rng(opts.seed, 0x57a7);
    while (static_cast<int>(starts.size()) < opts.starts) {
      starts.push_back(draw_cone_point(rng, p, cone));
    }
  }

  std::vector<Candidate> results(starts.size());
  parallel_for(starts.size(), opts.threads, [&](std::size_t k) {
    const Eigen::VectorXd b = local_descent(f, grad, project, starts[k], opts.local_iterations);
    if (b.size() > 0) {
      results[k].value = f(b);
      results[k].b = b;
    }
  });
  Candidate best;
  for (const Candidate& c : results) {
    if (c.b.size() > 0) take_better(best, c.value, c.b);
  }
  return best;
}

// ----- exact per-orthant compatibility factor ---------------------------

// With the signs of b_O fixed and |b_O|_1 pinned to 1, minimizing b'Sb over
// the cone section is a convex QP over (simplex) x (l1 ball). FISTA with the
// constant step 1/L, monotone restarts, and a gradient-mapping stop.
struct OrthantQp {
  const Eigen::MatrixXd& sigma;
  const ConeSpec& cone;
  std::vector<int> off;      // complement of the support
  Eigen::VectorXd sign_on;   // d_o entries, +-1
  double l_const;            // 2 lambda_max
  double tol;

  Eigen::VectorXd embed(const Eigen::VectorXd& w, const Eigen::VectorXd& v) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(sigma.rows());
    for (std::size_t k = 0; k < cone.support.size(); ++k) {
      b[cone.support[k]] = sign_on[static_cast<Eigen::Index>(k)] * w[static_cast<Eigen::Index>(k)];
    }
    for (std::size_t m = 0; m < off.size(); ++m) b[off[m]] = v[static_cast<Eigen::Index>(m)];
    return b;
  }

  void split_grad(const Eigen::VectorXd& b, Eigen::VectorXd& gw, Eigen::VectorXd& gv) const {
    const Eigen::VectorXd gb = 2.0 * (sigma * b);
    gw.resize(static_cast<Eigen::Index>(cone.support.size()));
    gv.resize(static_cast<Eigen::Index>(off.size()));
    for (std::size_t k = 0; k < cone.support.size(); ++k) {
      gw[static_cast<Eigen::Index>(k)] =
          sign_on[static_cast<Eigen::Index>(k)] * gb[cone.support[k]];
    }
    for (std::size_t m = 0; m < off.size(); ++m) gv[static_cast<Eigen::Index>(m)] = gb[off[m]];
  }

  // Returns the minimizing direction (embedded, |b_O|_1 = 1).
  Eigen::VectorXd solve(int max_iterations) const {
    const auto d_o = static_cast<Eigen::Index>(cone.support.size());
    const auto m = static_cast<Eigen::Index>(off.size());
    Eigen::VectorXd w = Eigen::VectorXd::Constant(d_o, 1.0 / static_cast<double>(d_o));
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    if (l_const <= 0.0) return embed(w, v);  // sigma == 0: anything feasible is optimal

    Eigen::VectorXd yw = w, yv = v;
    double t = 1.0;
    double q_x = quad_form(sigma, embed(w, v));
    Eigen::VectorXd gw, gv;
    for (int it = 0; it < max_iterations; ++it) {
      split_grad(embed(yw, yv), gw, gv);
      Eigen::VectorXd w_new = project_simplex(yw - gw / l_const, 1.0);
      Eigen::VectorXd v_new = project_l1_ball(yv - gv / l_const, cone.xi);
      const double q_new = quad_form(sigma, embed(w_new, v_new));
      if (q_new > q_x) {
        // Momentum overshot; restart from the last good point.
        yw = w;
        yv = v;
        t = 1.0;
        continue;
      }
      // Gradient mapping at the new point decides convergence.
      split_grad(embed(w_new, v_new), gw, gv);
      const Eigen::VectorXd w_chk = project_simplex(w_new - gw / l_const, 1.0);
      const Eigen::VectorXd v_chk = project_l1_ball(v_new - gv / l_const, cone.xi);
      const double res =
          l_const * std::max((w_chk - w_new).lpNorm<Eigen::Infinity>(),
                             m > 0 ? (v_chk - v_new).lpNorm<Eigen::Infinity>() : 0.0);
      const double t_new = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      yw = w_new + (t - 1.0) / t_new * (w_new - w);
      yv = v_new + (t - 1.0) / t_new * (v_new - v);
      w = w_new;
      v = v_new;
      q_x = q_new;
      t = t_new;
      if (res <= tol) break;
    }
    return embed(w, v);
  }
};

FactorReport finalize_report(const Eigen::MatrixXd& sigma, const ConeSpec& cone,
                             const FactorOptions& opts, Candidate optimized, FactorMethod method,
                             const std::function<double(const Eigen::VectorXd&)>& f) {
  const int p = static_cast<int>(sigma.rows());
  const Candidate sampled = sampling_envelope(f, p, cone, opts.samples, opts.seed, opts.threads);

  if (optimized.b.size() == 0 && sampled.b.size() == 0) {
    throw std::logic_error("factors: no feasible direction found");
  }

  FactorReport report;
  if (sampled.b.size() > 0 && sampled.value < optimized.value) {
    report.value = sampled.value;
    report.minimizer = sampled.b;
    report.method = FactorMethod::SamplingBound;
  } else {
    report.value = optimized.value;
    report.minimizer = optimized.b;
    report.method = method;
  }
  report.minimizer.normalize();
  report.value = f(report.minimizer);  // exact quotient at the reported direction
  report.gap_estimate = sampled.b.size() > 0 ? std::max(0.0, sampled.value - report.value) : 0.0;
  return report;
}

}  // namespace

FactorReport compatibility_factor(const Eigen::MatrixXd& sigma_in, const ConeSpec& cone,
                                  const FactorOptions& opts) {
  const Eigen::MatrixXd sigma = checked_sigma(sigma_in);
  const int p = static_cast<int>(sigma.rows());
  ConeSpec_check(cone, p);
  const auto d_o = static_cast<int>(cone.support.size());

  auto f = [&](const Eigen::VectorXd& b) { return kappa_quotient(sigma, cone, b); };

  Candidate best;
  FactorMethod method;
  if (d_o <= opts.orthant_limit) {
    method = FactorMethod::OrthantExact;
    const double l_max =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .maxCoeff();
    std::vector<int> off;
    for (int j = 0; j < p; ++j) {
      if (std::find(cone.support.begin(), cone.support.end(), j) == cone.support.end()) {
        off.push_back(j);
      }
    }
    const int patterns = 1 << (d_o - 1);  // global sign flip is free
    std::vector<Candidate> per_pattern(static_cast<std::size_t>(patterns));
    parallel_for(static_cast<std::size_t>(patterns), opts.threads, [&](std::size_t mask) {
      Eigen::VectorXd sign_on = Eigen::VectorXd::Ones(d_o);
      for (int k = 1; k < d_o; ++k) {
        if ((mask >> (k - 1)) & 1U) sign_on[k] = -1.0;
      }
      OrthantQp qp{sigma, cone, off, sign_on, 2.0 * std::max(l_max, 0.0),
                   opts.tolerance * std::max(1.0, sigma.cwiseAbs().maxCoeff())};
      const Eigen::VectorXd b = qp.solve(opts.max_iterations);
      per_pattern[mask] = {f(b), b};
    });
    for (const Candidate& c : per_pattern) take_better(best, c.value, c.b);
  } else {
    method = FactorMethod::Multistart;
    const double d_od = static_cast<double>(d_o);
    // Minimize kappa^2 = d_o b'Sb / |b_O|_1^2; same minimizers, smooth pieces.
    auto f2 = [&](const Eigen::VectorXd& b) {
      const double den = support_l1(cone, b);
      if (!(den > 0.0)) return kInf;
      return d_od * quad_form(sigma, b) / (den * den);
    };
    auto grad = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
      const double den = support_l1(cone, b);
      const double num = quad_form(sigma, b);
      return 2.0 * d_od *
             ((sigma * b) * den - num * support_sign(cone, b)) / (den * den * den);
    };
    best = multistart_minimize(sigma, cone, opts, f2, grad);
    if (best.b.size() > 0) best.value = f(best.b);
  }
  return finalize_report(sigma, cone, opts, std::move(best), method, f);
}

FactorReport weak_cone_invertibility(const Eigen::MatrixXd& sigma_in, const ConeSpec& cone,
                                     double q, const FactorOptions& opts) {
  if (!((q >= 1.0 && q <= 2.0) || std::isinf(q))) {
    throw std::invalid_argument("weak_cone_invertibility: q must lie in [1, 2] or be inf");
  }
  const Eigen::MatrixXd sigma = checked_sigma(sigma_in);
  const int p = static_cast<int>(sigma.rows());
  ConeSpec_check(cone, p);
  const double d_o = static_cast<double>(cone.support.size());
  const double coef = std::isinf(q) ? 1.0 : std::pow(d_o, 1.0 / q);

  auto f = [&](const Eigen::VectorXd& b) { return fq_quotient(sigma, cone, q, b); };
  auto grad = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
    const double d1 = support_l1(cone, b);
    const double dq = lq_norm(b, q);
    const double num = quad_form(sigma, b);
    const Eigen::VectorXd gn = 2.0 * (sigma * b);
    const Eigen::VectorXd g1 = support_sign(cone, b);
    const Eigen::VectorXd gq = lq_subgrad(b, q);
    return coef * (gn * (d1 * dq) - num * (g1 * dq + d1 * gq)) / (d1 * d1 * dq * dq);
  };

  Candidate best = multistart_minimize(sigma, cone, opts, f, grad);
  return finalize_report(sigma, cone, opts, std::move(best), FactorMethod::Multistart, f);
}

FactorReport restricted_eigenvalue(const Eigen::MatrixXd& sigma_in, const ConeSpec& cone,
                                   const FactorOptions& opts) {
  const Eigen::MatrixXd sigma = checked_sigma(sigma_in);
  const int p = static_cast<int>(sigma.rows());
  ConeSpec_check(cone, p);

  auto f = [&](const Eigen::VectorXd& b) { return re_quotient(sigma, b); };
  // Rayleigh-style gradient of RE^2; well scaled near the sphere.
  auto grad = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
    const double nn = b.squaredNorm();
    const double val = quad_form(sigma, b) / nn;
    return 2.0 * ((sigma * b) - val * b) / nn;
  };

  Candidate best;
  FactorMethod method;
  if (p <= opts.re_orthant_limit) {
    method = FactorMethod::OrthantExact;
    const Eigen::VectorXd c = cone_normal(cone, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::VectorXd vmin_abs = eig.eigenvectors().col(0).cwiseAbs();

    const long long orthants = 1LL << (p - 1);  // global sign flip is free
    std::vector<Candidate> per_orthant(static_cast<std::size_t>(orthants));
    parallel_for(static_cast<std::size_t>(orthants), opts.threads, [&](std::size_t mask) {
      Eigen::VectorXd sign = Eigen::VectorXd::Ones(p);
      for (int k = 1; k < p; ++k) {
        if ((mask >> (k - 1)) & 1U) sign[k] = -1.0;
      }
      // Inside one orthant, the cone section in magnitude coordinates is the
      // convex set {y >= 0, c'y >= 0}; descend on the sphere slice.
      auto project = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        const Eigen::VectorXd y =
            project_nonneg_halfspace(sign.cwiseProduct(x), c);
        const double norm = y.norm();
        if (!(norm > 1e-300)) return Eigen::VectorXd();
        return sign.cwiseProduct(y) / norm;
      };
      Candidate local;
      std::vector<Eigen::VectorXd> starts;
      starts.push_back(sign);                          // uniform magnitudes
      starts.push_back(sign.cwiseProduct(vmin_abs));   // folded smallest eigvec
      CounterRng rng(opts.seed, derive_stream(0x0e11, mask));
      Eigen::VectorXd r(p);
      for (int j = 0; j < p; ++j) r[j] = rng.normal();
      starts.push_back(sign.cwiseProduct(r.cwiseAbs()));
      for (const auto& s0 : starts) {
        const Eigen::VectorXd b = local_descent(f, grad, project, s0, opts.local_iterations);
        if (b.size() > 0) take_better(local, f(b), b);
      }
      per_orthant[mask] = std::move(local);
    });
    for (const Candidate& cand : per_orthant) {
      if (cand.b.size() > 0) take_better(best, cand.value, cand.b);
    }
  } else {
    method = FactorMethod::Multistart;
    best = multistart_minimize(sigma, cone, opts, f, grad);
  }
  return finalize_report(sigma, cone, opts, std::move(best), method, f);
}

}  // namespace coxlasso
