#include "coxlasso/truncated.hpp"

#include "coxlasso/parallel.hpp"
#include "coxlasso/partial_likelihood.hpp"
#include "coxlasso/rng.hpp"
#include "coxlasso/simulate.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace coxlasso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_args(const Dataset& d, const Eigen::VectorXd& beta, const BaselineHazard& baseline,
                double cap) {
  if (beta.size() != d.p) {
    throw std::invalid_argument("truncated: beta length does not match dataset dimension");
  }
  baseline.check();
  if (!(cap > 0.0)) throw std::invalid_argument("truncated: weight cap must be positive");
}

// Shared integrator for the compensated and weight-capped matrices. The
// integrand is constant on each interval between consecutive change points
// (at-risk boundaries and path breakpoints) and left-continuous, so the
// value at an interval's right endpoint is its value on the whole interval.
Eigen::MatrixXd capped_weight_integral(const Dataset& d, const Eigen::VectorXd& beta,
                                       const BaselineHazard& baseline, double t_star, double cap) {
  check_args(d, beta, baseline, cap);
  const int p = d.p;
  const int n = d.n();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  if (!(t_star > 0.0) || n == 0) return acc;

  double max_end = 0.0;
  for (const Subject& s : d.subjects) max_end = std::max(max_end, s.at_risk_end);
  const double t_hi = std::min(t_star, max_end);  // integrand vanishes past every at-risk window
  if (!(t_hi > 0.0) || std::isinf(t_hi)) {
    if (std::isinf(t_hi)) {
      throw std::invalid_argument("truncated: unbounded at-risk window needs a finite t_star");
    }
    return acc;
  }

  std::vector<double> pts;
  for (const Subject& s : d.subjects) {
    if (s.at_risk_start > 0.0 && s.at_risk_start < t_hi) pts.push_back(s.at_risk_start);
    if (s.at_risk_end > 0.0 && s.at_risk_end < t_hi) pts.push_back(s.at_risk_end);
    for (double bp : s.path.breakpoints) {
      if (bp > 0.0 && bp < t_hi) pts.push_back(bp);
    }
  }
  pts.push_back(t_hi);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  std::vector<double> w(static_cast<std::size_t>(n));
  double lam_prev = 0.0;
  for (double t : pts) {
    const double lam = baseline.cumulative(t);
    const double dlam = lam - lam_prev;
    lam_prev = lam;
    if (!(dlam > 0.0)) continue;

    // Capped weights and their mean at this time, then the centered second
    // moment in two passes so rounding keeps it positive semidefinite.
    double sw = 0.0;
    Eigen::VectorXd swz = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
      const Subject& s = d.subjects[static_cast<std::size_t>(i)];
      if (!s.at_risk(t)) {
        w[static_cast<std::size_t>(i)] = 0.0;
        continue;
      }
      const Eigen::VectorXd& z = s.path.value_at(t);
      const double wi = std::min(cap, std::exp(z.dot(beta)));
      w[static_cast<std::size_t>(i)] = wi;
      sw += wi;
      swz += wi * z;
    }
    if (!(sw > 0.0)) continue;
    const Eigen::VectorXd mean = swz / sw;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi == 0.0) continue;
      const Eigen::VectorXd c = d.subjects[static_cast<std::size_t>(i)].path.value_at(t) - mean;
      g.noalias() += wi * (c * c.transpose());
    }
    acc += (dlam / static_cast<double>(n)) * g;
  }
  return ((acc + acc.transpose()) / 2.0).eval();
}

}  // namespace

Eigen::MatrixXd truncated_hessian(const Dataset& d, const Eigen::VectorXd& beta, double t_star) {
  return PartialLikelihood(d).hessian_up_to(beta, t_star);
}

Eigen::MatrixXd compensated_hessian(const Dataset& d, const Eigen::VectorXd& beta,
                                    const BaselineHazard& baseline, double t_star) {
  return capped_weight_integral(d, beta, baseline, t_star, kInf);
}

Eigen::MatrixXd weight_truncated_hessian(const Dataset& d, const Eigen::VectorXd& beta,
                                         const BaselineHazard& baseline, double t_star,
                                         double m_cap) {
  return capped_weight_integral(d, beta, baseline, t_star, m_cap);
}

namespace {

// mu as a step function on a thinned grid, with prefix integrals against
// Lambda0 stored at the grid points. Queries interpolate linearly in
// Lambda0 within a cell, which is exact for a step mu.
struct MeanPath {
  std::vector<double> grid;               // strictly increasing, last = t_star
  std::vector<double> lam;                // Lambda0 at grid points
  std::vector<Eigen::VectorXd> mu;        // mean on (grid[k-1], grid[k]]
  std::vector<Eigen::VectorXd> p1;        // int_0^{grid[k]} mu dLambda0
  std::vector<Eigen::MatrixXd> p2;        // int_0^{grid[k]} mu mu' dLambda0
  const BaselineHazard* baseline = nullptr;

  std::size_t cell(double t) const {
    const auto it = std::lower_bound(grid.begin(), grid.end(), t);
    return it == grid.end() ? grid.size() - 1 : static_cast<std::size_t>(it - grid.begin());
  }

  void at(double t, Eigen::VectorXd& p1_out, Eigen::MatrixXd& p2_out) const {
    const std::size_t k = cell(t);
    const double lam_base = k > 0 ? lam[k - 1] : 0.0;
    const double dl = baseline->cumulative(t) - lam_base;
    if (k > 0) {
      p1_out = p1[k - 1] + dl * mu[k];
      p2_out = p2[k - 1] + dl * (mu[k] * mu[k].transpose());
    } else {
      p1_out = dl * mu[k];
      p2_out = dl * (mu[k] * mu[k].transpose());
    }
  }
};

constexpr std::size_t kGridBudget = 4000;

}  // namespace

PopulationSigma population_sigma(const SimConfig& cfg, double t_star, double m_cap,
                                 int replications, int threads) {
  cfg.check();
  if (!(t_star > 0.0) || std::isinf(t_star)) {
    throw std::invalid_argument("population_sigma: t_star must be positive and finite");
  }
  if (!(m_cap > 0.0)) throw std::invalid_argument("population_sigma: m_cap must be positive");
  if (replications < 2) {
    throw std::invalid_argument("population_sigma: need at least 2 replications");
  }
  const int p = cfg.p;
  const Eigen::VectorXd beta = cfg.beta_true;

  // Auxiliary sample: one batch per replication, on its own seed substream.
  std::vector<Dataset> aux(static_cast<std::size_t>(replications));
  parallel_for(aux.size(), threads, [&](std::size_t b) {
    SimConfig c = cfg;
    c.seed = derive_stream(cfg.seed, 0xA07, b);
    aux[b] = simulate_dataset(c);
  });

  MeanPath mean_path;
  mean_path.baseline = &cfg.baseline;
  {
    std::vector<double> pts;
    for (const Dataset& ds : aux) {
      for (const Subject& s : ds.subjects) {
        if (s.at_risk_start > 0.0 && s.at_risk_start < t_star) pts.push_back(s.at_risk_start);
        if (s.at_risk_end > 0.0 && s.at_risk_end < t_star) pts.push_back(s.at_risk_end);
        for (double bp : s.path.breakpoints) {
          if (bp > 0.0 && bp < t_star) pts.push_back(bp);
        }
      }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() > kGridBudget - 1) {
      // Thin to the budget, keeping order; mu varies slowly, so a coarser
      // step grid changes the estimator by far less than its Monte Carlo
      // standard error.
      std::vector<double> thin;
      thin.reserve(kGridBudget - 1);
      for (std::size_t k = 1; k < kGridBudget; ++k) {
        thin.push_back(pts[k * pts.size() / kGridBudget]);
      }
      thin.erase(std::unique(thin.begin(), thin.end()), thin.end());
      pts = std::move(thin);
    }
    pts.push_back(t_star);
    mean_path.grid = std::move(pts);
  }

  const std::size_t cells = mean_path.grid.size();
  mean_path.lam.resize(cells);
  mean_path.mu.assign(cells, Eigen::VectorXd::Zero(p));
  parallel_for(cells, threads, [&](std::size_t k) {
    const double t = mean_path.grid[k];
    mean_path.lam[k] = cfg.baseline.cumulative(t);
    double sw = 0.0;
    Eigen::VectorXd swz = Eigen::VectorXd::Zero(p);
    for (const Dataset& ds : aux) {
      for (const Subject& s : ds.subjects) {
        if (!s.at_risk(t)) continue;
        const Eigen::VectorXd& z = s.path.value_at(t);
        const double w = std::min(m_cap, std::exp(z.dot(beta)));
        sw += w;
        swz += w * z;
      }
    }
    if (sw > 0.0) mean_path.mu[k] = swz / sw;
  });
  mean_path.p1.resize(cells);
  mean_path.p2.resize(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    const double dl = mean_path.lam[k] - (k > 0 ? mean_path.lam[k - 1] : 0.0);
    mean_path.p1[k] = (k > 0 ? mean_path.p1[k - 1] : Eigen::VectorXd::Zero(p).eval()) +
                      dl * mean_path.mu[k];
    mean_path.p2[k] =
        (k > 0 ? mean_path.p2[k - 1] : Eigen::MatrixXd::Zero(p, p).eval()) +
        dl * (mean_path.mu[k] * mean_path.mu[k].transpose());
  }

  double r_star = 0.0;
  long long aux_subjects = 0;
  for (const Dataset& ds : aux) {
    for (const Subject& s : ds.subjects) {
      ++aux_subjects;
      if (!s.at_risk(t_star)) continue;
      r_star += std::min(m_cap, std::exp(s.path.value_at(t_star).dot(beta)));
    }
  }
  r_star /= static_cast<double>(aux_subjects);

  // Fresh replications, integrated exactly against the stored prefixes:
  // on each constancy segment (a, b] of a subject, with z and w frozen,
  //   w * [ z z' dLam - z dP1' - dP1 z' + dP2 ]
  // equals w * int (z - mu)(z - mu)' dLambda0 over the segment.
  std::vector<Eigen::MatrixXd> xs(static_cast<std::size_t>(replications));
  parallel_for(xs.size(), threads, [&](std::size_t r) {
    SimConfig c = cfg;
    c.seed = derive_stream(cfg.seed, 0xB07, r);
    const Dataset ds = simulate_dataset(c);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd p1_a(p), p1_b(p);
    Eigen::MatrixXd p2_a(p, p), p2_b(p, p);
    for (const Subject& s : ds.subjects) {
      const double lo = std::max(s.at_risk_start, 0.0);
      const double hi = std::min(s.at_risk_end, t_star);
      if (!(hi > lo)) continue;
      std::vector<double> cuts;
      cuts.push_back(lo);
      for (double bp : s.path.breakpoints) {
        if (bp > lo && bp < hi) cuts.push_back(bp);
      }
      cuts.push_back(hi);
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k];
        const double b = cuts[k + 1];
        const Eigen::VectorXd& z = s.path.value_at(b);
        const double w = std::min(m_cap, std::exp(z.dot(beta)));
        const double dlam = cfg.baseline.cumulative(b) - cfg.baseline.cumulative(a);
        if (!(dlam > 0.0) || w == 0.0) continue;
        mean_path.at(a, p1_a, p2_a);
        mean_path.at(b, p1_b, p2_b);
        const Eigen::VectorXd dp1 = p1_b - p1_a;
        x.noalias() += w * (dlam * (z * z.transpose()) - z * dp1.transpose() -
                            dp1 * z.transpose() + (p2_b - p2_a));
      }
    }
    xs[r] = (x / static_cast<double>(cfg.n)).eval();
  });

  PopulationSigma out;
  out.replications = replications;
  out.aux_subjects = aux_subjects;
  out.r_star = r_star;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(p, p);
  for (const Eigen::MatrixXd& x : xs) mean += x;
  mean /= static_cast<double>(replications);
  out.sigma = ((mean + mean.transpose()) / 2.0).eval();
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(p, p);
  for (const Eigen::MatrixXd& x : xs) var += (x - mean).cwiseProduct(x - mean);
  var /= static_cast<double>(replications - 1);
  out.se = (var / static_cast<double>(replications)).cwiseSqrt();
  out.rho_star = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(out.sigma, Eigen::EigenvaluesOnly)
                     .eigenvalues()
                     .minCoeff();
  return out;
}

}  // namespace coxlasso
