#include "coxlasso/truncated.hpp"

#include "coxlasso/partial_likelihood.hpp"
#include "coxlasso/rng.hpp"
#include "coxlasso/simulate.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace coxlasso;
using namespace testutil;

namespace {

double eigmin(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

// Independent evaluation of the compensated integral: walk the same change
// points but pull the integrand from risk_set_moments, which computes the
// centered second moment through a completely different code path.
Eigen::MatrixXd moments_oracle(const Dataset& d, const Eigen::VectorXd& beta,
                               const BaselineHazard& baseline, double t_star) {
  double max_end = 0.0;
  for (const Subject& s : d.subjects) max_end = std::max(max_end, s.at_risk_end);
  const double t_hi = std::min(t_star, max_end);

  std::vector<double> pts;
  for (const Subject& s : d.subjects) {
    if (s.at_risk_start > 0.0 && s.at_risk_start < t_hi) pts.push_back(s.at_risk_start);
    if (s.at_risk_end < t_hi) pts.push_back(s.at_risk_end);
    for (double bp : s.path.breakpoints) {
      if (bp > 0.0 && bp < t_hi) pts.push_back(bp);
    }
  }
  pts.push_back(t_hi);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d.p, d.p);
  double lam_prev = 0.0;
  for (double t : pts) {
    const double dlam = baseline.cumulative(t) - lam_prev;
    lam_prev = baseline.cumulative(t);
    bool anyone = false;
    for (const Subject& s : d.subjects) anyone = anyone || s.at_risk(t);
    if (!anyone || !(dlam > 0.0)) continue;
    const RiskSetMoments m = risk_set_moments(d, t, beta);
    acc += dlam * m.r * m.v;
  }
  return acc;
}

}  // namespace

TEST_CASE("truncated hessian wraps the cached evaluator") {
  const Dataset d = simulate_dataset(basic_config(50, 3, 7));
  const PartialLikelihood pl(d);
  const Eigen::VectorXd beta = vec({0.2, -0.1, 0.4});
  CHECK(truncated_hessian(d, beta, 1.0) == pl.hessian_up_to(beta, 1.0));
  CHECK(truncated_hessian(d, beta, 100.0) == pl.hessian(beta));
}

TEST_CASE("two subject compensated matrix has a closed form") {
  // Opposite constant covariates +-c, unit baseline: on (0, 1] both subjects
  // are at risk at beta = 0, the centered second moment is c^2, and past the
  // first window only one subject remains so the integrand vanishes.
  const Dataset d = two_subject_dataset();
  const Eigen::VectorXd zero = vec({0.0});
  BaselineHazard base;
  base.kind = BaselineHazard::Kind::Constant;
  base.rate = 1.0;

  CHECK(compensated_hessian(d, zero, base, 0.5)(0, 0) ==
        doctest::Approx(0.5 * 0.25).epsilon(1e-14));
  CHECK(compensated_hessian(d, zero, base, 1.0)(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-14));
  CHECK(compensated_hessian(d, zero, base, 2.0)(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-14));
  // Past every at-risk window nothing more accrues.
  CHECK(compensated_hessian(d, zero, base, 50.0)(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("compensated integral matches an independent moments walk") {
  SimConfig cfg = basic_config(40, 2, 17);
  cfg.beta_true = vec({0.6, -0.4});
  const Dataset d = simulate_dataset(cfg);
  const Eigen::VectorXd beta = vec({0.3, 0.5});

  for (double t_star : {0.4, 1.1, 2.5}) {
    const Eigen::MatrixXd got = compensated_hessian(d, beta, cfg.baseline, t_star);
    const Eigen::MatrixXd want = moments_oracle(d, beta, cfg.baseline, t_star);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("compensated integral agrees with a brute riemann sum") {
  SimConfig cfg = basic_config(30, 2, 23);
  cfg.beta_true = vec({0.5, 0.5});
  cfg.baseline.kind = BaselineHazard::Kind::Weibull;
  cfg.baseline.shape = 1.4;
  cfg.baseline.scale = 1.2;
  const Dataset d = simulate_dataset(cfg);
  const Eigen::VectorXd beta = vec({-0.2, 0.4});
  const double t_star = 1.0;

  const int cells = 40000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 2);
  for (int k = 0; k < cells; ++k) {
    const double mid = t_star * (k + 0.5) / cells;
    bool anyone = false;
    for (const Subject& s : d.subjects) anyone = anyone || s.at_risk(mid);
    if (!anyone) continue;
    const RiskSetMoments m = risk_set_moments(d, mid, beta);
    const double dlam = cfg.baseline.cumulative(t_star * (k + 1.0) / cells) -
                        cfg.baseline.cumulative(t_star * k / cells);
    sum += dlam * m.r * m.v;
  }
  const Eigen::MatrixXd got = compensated_hessian(d, beta, cfg.baseline, t_star);
  CHECK((got - sum).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("weight cap orderings and limits") {
  SimConfig cfg = basic_config(60, 3, 31);
  cfg.beta_true = vec({0.8, -0.5, 0.3});
  const Dataset d = simulate_dataset(cfg);
  const Eigen::VectorXd beta = vec({0.5, 0.2, -0.6});
  const double t_star = 1.5;

  const Eigen::MatrixXd comp = compensated_hessian(d, beta, cfg.baseline, t_star);

  SUBCASE("a cap above every weight changes nothing") {
    CHECK(weight_truncated_hessian(d, beta, cfg.baseline, t_star, 1e12) == comp);
  }
  SUBCASE("capping can only shrink in the psd order") {
    for (double cap : {0.5, 0.9, 1.1, 2.0}) {
      const Eigen::MatrixXd capped = weight_truncated_hessian(d, beta, cfg.baseline, t_star, cap);
      CHECK(eigmin(capped) >= -1e-10);
      CHECK(eigmin(comp - capped) >= -1e-10);
    }
  }
  SUBCASE("once the cap binds everywhere the matrix is linear in it") {
    // Weights are bounded below by exp(-|beta|_1 K/2) ~ 0.52, so tiny caps
    // bind for every subject and the capped mean no longer depends on the cap.
    const Eigen::MatrixXd a = weight_truncated_hessian(d, beta, cfg.baseline, t_star, 1e-8);
    const Eigen::MatrixXd b = weight_truncated_hessian(d, beta, cfg.baseline, t_star, 1e-9);
    CHECK((1e8 * a - 1e9 * b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.cwiseAbs().maxCoeff() <= 1e-8 * cfg.baseline.cumulative(t_star));
  }
}

TEST_CASE("identically zero covariates produce zero matrices") {
  Dataset d;
  d.p = 1;
  d.k_bound = 1.0;
  d.subjects.push_back(subject(0.0, 1.0, 1.0, constant_path(vec({0.0}))));
  d.subjects.push_back(subject(0.0, 1.7, 1.7, constant_path(vec({0.0}))));
  d.subjects.push_back(subject(0.0, 2.5, {}, constant_path(vec({0.0}))));
  BaselineHazard base;
  base.kind = BaselineHazard::Kind::Constant;
  base.rate = 1.0;
  const Eigen::VectorXd beta = vec({0.7});

  CHECK(truncated_hessian(d, beta, 2.0).isZero(0.0));
  CHECK(compensated_hessian(d, beta, base, 2.0).isZero(0.0));
  CHECK(weight_truncated_hessian(d, beta, base, 2.0, 0.5).isZero(0.0));
}

TEST_CASE("argument validation") {
  const Dataset d = two_subject_dataset();
  BaselineHazard base;
  base.kind = BaselineHazard::Kind::Constant;
  base.rate = 1.0;

  CHECK_THROWS_AS((void)compensated_hessian(d, vec({0.0, 0.0}), base, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)weight_truncated_hessian(d, vec({0.0}), base, 1.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)weight_truncated_hessian(d, vec({0.0}), base, 1.0, -1.0),
                  std::invalid_argument);

  // An unbounded window with an unbounded horizon has no finite integral.
  Dataset open = d;
  open.subjects[1].at_risk_end = std::numeric_limits<double>::infinity();
  open.subjects[1].event_time.reset();
  CHECK_THROWS_AS((void)compensated_hessian(open, vec({0.0}), base,
                                            std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  // A finite horizon keeps it well defined.
  CHECK_NOTHROW((void)compensated_hessian(open, vec({0.0}), base, 3.0));
}

TEST_CASE("population sigma of the null constant design") {
  // beta = 0, no censoring, unit baseline: each subject contributes
  // var(z) * min(T, t_star) in expectation, so sigma ~ (1/12)(1 - e^{-1}) I
  // and r_star ~ P(T > 1) = e^{-1}.
  SimConfig cfg;
  cfg.n = 80;
  cfg.p = 2;
  cfg.beta_true = Eigen::VectorXd::Zero(2);
  cfg.baseline.kind = BaselineHazard::Kind::Constant;
  cfg.baseline.rate = 1.0;
  cfg.censor_rate = 0.0;
  cfg.admin_time = std::numeric_limits<double>::infinity();
  cfg.covariate_law = CovariateLaw::ConstantUniform;
  cfg.k_bound = 1.0;
  cfg.seed = 2027;

  const PopulationSigma pop = population_sigma(cfg, 1.0, 5.0, 300);
  CHECK(pop.replications == 300);
  CHECK(pop.aux_subjects == 300LL * 80);
  CHECK(pop.sigma == pop.sigma.transpose());
  CHECK(pop.rho_star == doctest::Approx(eigmin(pop.sigma)).epsilon(1e-12));
  CHECK(pop.rho_star > 0.0);

  const double want = (1.0 - std::exp(-1.0)) / 12.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double target = i == j ? want : 0.0;
      CHECK(std::abs(pop.sigma(i, j) - target) < 5.0 * pop.se(i, j) + 5e-4);
    }
  }
  CHECK(pop.r_star == doctest::Approx(std::exp(-1.0)).epsilon(0.1));
}

TEST_CASE("population sigma is deterministic and thread count invariant") {
  SimConfig cfg = basic_config(40, 2, 2028);
  const PopulationSigma a = population_sigma(cfg, 1.0, 2.0, 50, 1);
  const PopulationSigma b = population_sigma(cfg, 1.0, 2.0, 50, 1);
  const PopulationSigma c = population_sigma(cfg, 1.0, 2.0, 50, 4);
  CHECK(a.sigma == b.sigma);
  CHECK(a.se == b.se);
  CHECK(a.sigma == c.sigma);
  CHECK(a.se == c.se);
  CHECK(a.r_star == c.r_star);
}

TEST_CASE("population sigma approximates the large sample capped matrix") {
  // One large empirical draw of the capped compensated matrix should sit
  // within Monte Carlo distance of the population estimate.
  SimConfig cfg = basic_config(60, 2, 2029);
  cfg.beta_true = vec({0.5, -0.5});
  const double t_star = 1.2;
  const double m_cap = 1.2;

  const PopulationSigma pop = population_sigma(cfg, t_star, m_cap, 400);

  SimConfig big = cfg;
  big.n = 4000;
  big.seed = 777777;
  const Dataset d = simulate_dataset(big);
  const Eigen::MatrixXd emp =
      weight_truncated_hessian(d, cfg.beta_true, cfg.baseline, t_star, m_cap);

  CHECK((emp - pop.sigma).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("population sigma argument validation") {
  const SimConfig cfg = basic_config(20, 1, 1);
  CHECK_THROWS_AS((void)population_sigma(cfg, 0.0, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(
      (void)population_sigma(cfg, std::numeric_limits<double>::infinity(), 1.0, 10),
      std::invalid_argument);
  CHECK_THROWS_AS((void)population_sigma(cfg, 1.0, 0.0, 10), std::invalid_argument);
  CHECK_THROWS_AS((void)population_sigma(cfg, 1.0, 1.0, 1), std::invalid_argument);
}
