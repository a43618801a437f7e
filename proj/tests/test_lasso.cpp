#include "coxlasso/lasso.hpp"

#include "coxlasso/rng.hpp"
#include "coxlasso/simulate.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

using namespace coxlasso;
using namespace testutil;

namespace {

double objective_at(const PartialLikelihood& pl, const Eigen::VectorXd& beta, double lambda) {
  return pl.value(beta) + lambda * beta.lpNorm<1>();
}

// Exhaustive 2d reference: a 41x41 grid around the origin, re-centered and
// shrunk twice. The final step is 4e-4, far below what the 1e-8 objective
// comparison needs, because the objective is locally quadratic around the
// minimizer.
double grid_minimum(const PartialLikelihood& pl, double lambda) {
  Eigen::Vector2d center(0.0, 0.0);
  double half = 0.8;
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_point = center;
  for (int stage = 0; stage < 3; ++stage) {
    for (int a = -20; a <= 20; ++a) {
      for (int b = -20; b <= 20; ++b) {
        Eigen::VectorXd point(2);
        point << center[0] + half * a / 20.0, center[1] + half * b / 20.0;
        const double val = objective_at(pl, point, lambda);
        if (val < best) {
          best = val;
          best_point = point;
        }
      }
    }
    center = best_point;
    half /= 10.0;
  }
  return best;
}

Eigen::VectorXd newton_minimizer(const PartialLikelihood& pl) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(pl.p());
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd g = pl.gradient(beta);
    if (g.lpNorm<Eigen::Infinity>() < 1e-13) break;
    beta -= pl.hessian(beta).ldlt().solve(g);
  }
  return beta;
}

}  // namespace

TEST_CASE("penalty at or above lambda_max pins the fit at zero") {
  const Dataset d = simulate_dataset(basic_config(80, 4, 5));
  const PartialLikelihood pl(d);
  const double lmax = lambda_max(pl);
  CHECK(lmax == pl.gradient(Eigen::VectorXd::Zero(4)).lpNorm<Eigen::Infinity>());

  for (double lam : {lmax, 1.5 * lmax}) {
    const FitResult fit = fit_lasso(pl, lam);
    CHECK(fit.converged);
    CHECK(fit.beta_hat.isZero(0.0));
    CHECK(fit.kkt_residual == 0.0);
    CHECK(fit.objective == pl.value(Eigen::VectorXd::Zero(4)));
  }

  // Just below lambda_max at least one coordinate moves off zero.
  const FitResult below = fit_lasso(pl, 0.99 * lmax);
  CHECK(below.converged);
  CHECK(below.beta_hat.lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("unpenalized fit matches a newton solve") {
  SimConfig cfg = basic_config(400, 3, 13);
  cfg.beta_true = vec({0.7, -0.4, 0.2});
  const Dataset d = simulate_dataset(cfg);
  const PartialLikelihood pl(d);

  const Eigen::VectorXd exact = newton_minimizer(pl);
  REQUIRE(pl.gradient(exact).lpNorm<Eigen::Infinity>() < 1e-12);

  SolverOptions opts;
  opts.tolerance = 1e-10;
  const FitResult fit = fit_lasso(pl, 0.0, opts);
  CHECK(fit.converged);
  CHECK((fit.beta_hat - exact).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("two dimensional fits beat an exhaustive grid") {
  SimConfig cfg = basic_config(120, 2, 29);
  cfg.beta_true = vec({0.6, -0.3});
  const Dataset d = simulate_dataset(cfg);
  const PartialLikelihood pl(d);
  const double lmax = lambda_max(pl);

  for (double lam : {0.5 * lmax, 0.2 * lmax, 0.05 * lmax}) {
    const FitResult fit = fit_lasso(pl, lam);
    REQUIRE(fit.converged);
    CHECK(fit.kkt_residual <= fit.options.tolerance);
    CHECK(fit.objective == doctest::Approx(objective_at(pl, fit.beta_hat, lam)).epsilon(1e-15));
    CHECK(fit.objective <= grid_minimum(pl, lam) + 1e-8);
    CHECK(fit.objective <= objective_at(pl, Eigen::VectorXd::Zero(2), lam));
  }
}

TEST_CASE("warm starts converge to the same solution") {
  const Dataset d = simulate_dataset(basic_config(100, 3, 41));
  const PartialLikelihood pl(d);
  const double lam = 0.3 * lambda_max(pl);

  const FitResult cold = fit_lasso(pl, lam);
  REQUIRE(cold.converged);

  SolverOptions warm;
  warm.warm_start = vec({0.5, -0.5, 0.5});
  const FitResult hot = fit_lasso(pl, lam, warm);
  REQUIRE(hot.converged);
  CHECK((hot.beta_hat - cold.beta_hat).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("path fits agree with cold fits at every penalty") {
  const Dataset d = simulate_dataset(basic_config(100, 4, 53));
  const PartialLikelihood pl(d);
  const double lmax = lambda_max(pl);

  std::vector<double> grid;
  for (int k = 0; k < 6; ++k) grid.push_back(lmax * std::pow(0.5, k));
  const std::vector<FitResult> path = fit_path(pl, grid);
  REQUIRE(path.size() == grid.size());

  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(path[k].lambda == grid[k]);
    REQUIRE(path[k].converged);
    const FitResult cold = fit_lasso(pl, grid[k]);
    CHECK((path[k].beta_hat - cold.beta_hat).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(path[k].objective <= cold.objective + 1e-10);
  }
}

TEST_CASE("path rejects grids that are not strictly decreasing and positive") {
  const Dataset d = simulate_dataset(basic_config(40, 2, 67));
  const PartialLikelihood pl(d);
  CHECK_THROWS_AS((void)fit_path(pl, {0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS((void)fit_path(pl, {0.1, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS((void)fit_path(pl, {0.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)fit_path(pl, {}), std::invalid_argument);
}

TEST_CASE("kkt residual identities") {
  const Dataset d = simulate_dataset(basic_config(60, 3, 71));
  const PartialLikelihood pl(d);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);

  CHECK(kkt_residual(pl, zero, 0.0) == lambda_max(pl));
  CHECK(kkt_residual(pl, zero, lambda_max(pl)) == 0.0);
  CHECK(kkt_residual(d, zero, 0.0) == kkt_residual(pl, zero, 0.0));

  // At a converged fit the residual matches the stored value.
  const FitResult fit = fit_lasso(pl, 0.2 * lambda_max(pl));
  CHECK(kkt_residual(pl, fit.beta_hat, fit.lambda) == fit.kkt_residual);
}

TEST_CASE("theoretical penalty follows the tail bound formula") {
  const double got = theoretical_lambda(100, 50, 1.0, 2.0, 0.01);
  CHECK(got == doctest::Approx(1.2875796157736084).epsilon(1e-14));
  const double formula = (2.0 + 1.0) / (2.0 - 1.0) * std::sqrt(0.02 * std::log(2.0 * 50 / 0.01));
  CHECK(got == doctest::Approx(formula).epsilon(1e-15));
  // Scales linearly in the covariate bound and decays in n.
  CHECK(theoretical_lambda(100, 50, 2.0, 2.0, 0.01) == doctest::Approx(2.0 * got).epsilon(1e-15));
  CHECK(theoretical_lambda(400, 50, 1.0, 2.0, 0.01) == doctest::Approx(0.5 * got).epsilon(1e-15));
}

TEST_CASE("dataset overload matches the cached overload") {
  const Dataset d = simulate_dataset(basic_config(50, 2, 83));
  const PartialLikelihood pl(d);
  const double lam = 0.1;
  const FitResult a = fit_lasso(pl, lam);
  const FitResult b = fit_lasso(d, lam);
  CHECK(a.beta_hat == b.beta_hat);
  CHECK(a.iterations == b.iterations);
}
