#include "coxlasso/lasso.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace coxlasso {

namespace {

double kkt_from_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& beta, double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double r = beta[j] != 0.0 ? std::abs(g[j] + (beta[j] > 0.0 ? lambda : -lambda))
                                    : std::max(0.0, std::abs(g[j]) - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  return v.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

}  // namespace

double kkt_residual(const PartialLikelihood& pl, const Eigen::VectorXd& beta, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("kkt_residual: lambda must be >= 0");
  return kkt_from_gradient(pl.gradient(beta), beta, lambda);
}

double kkt_residual(const Dataset& d, const Eigen::VectorXd& beta, double lambda) {
  return kkt_residual(PartialLikelihood(d), beta, lambda);
}

FitResult fit_lasso(const PartialLikelihood& pl, double lambda, const SolverOptions& opts) {
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw std::invalid_argument("fit_lasso: lambda must be finite and >= 0");
  }
  if (opts.tolerance <= 0.0 || opts.max_iterations < 1 || opts.initial_step <= 0.0 ||
      opts.step_shrink <= 0.0 || opts.step_shrink >= 1.0 || opts.sufficient_decrease <= 0.0 ||
      opts.sufficient_decrease > 0.5) {
    throw std::invalid_argument("fit_lasso: bad solver options");
  }

  FitResult res;
  res.lambda = lambda;
  res.options = opts;

  Eigen::VectorXd x;
  if (opts.warm_start.size() == 0) {
    x = Eigen::VectorXd::Zero(pl.p());
  } else if (opts.warm_start.size() == pl.p()) {
    x = opts.warm_start;
  } else {
    throw std::invalid_argument("fit_lasso: warm start length does not match p");
  }

  Eigen::VectorXd g;
  double fx = pl.value_and_gradient(x, g);
  double obj = fx + lambda * x.lpNorm<1>();
  double step = opts.initial_step;

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    res.kkt_residual = kkt_from_gradient(g, x, lambda);
    if (res.kkt_residual <= opts.tolerance) {
      res.converged = true;
      break;
    }

    // Backtracking proximal step. Each shrink halves the step; acceptance
    // is guaranteed once step <= 1/L, so the loop terminates. The acceptance
    // test carries a rounding slack: near the optimum the true decrease per
    // step falls below the floating point resolution of the objective, and
    // demanding a measurable decrease there would stall the iteration at a
    // spurious residual floor even though the prox map still contracts.
    bool moved = false;
    bool measurable = false;
    while (step > 1e-300) {
      const Eigen::VectorXd u = soft_threshold(x - step * g, step * lambda);
      const Eigen::VectorXd diff = u - x;
      const double move2 = diff.squaredNorm();
      if (move2 == 0.0) {
        // Fixed point at this step size; a smaller step cannot move either
        // (the prox path shrinks with the step), so the residual is stalled
        // at rounding level. Treat as converged at the achieved residual.
        break;
      }
      const double fu = pl.value(u);
      const double obj_u = fu + lambda * u.lpNorm<1>();
      const double slack = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(obj));
      if (obj_u <= obj - opts.sufficient_decrease * move2 / step + slack) {
        measurable = obj - obj_u > slack;
        x = u;
        fx = pl.value_and_gradient(x, g);
        obj = fx + lambda * x.lpNorm<1>();
        moved = true;
        break;
      }
      step *= opts.step_shrink;
    }
    if (!moved) {
      // No productive move available at any step size: numerically stationary.
      res.kkt_residual = kkt_from_gradient(g, x, lambda);
      res.converged = res.kkt_residual <= opts.tolerance;
      break;
    }
    // Let the step recover between iterations, but only on the strength of a
    // decrease that cleared the rounding slack; growing on noise alone could
    // push the step into the oscillatory region and keep it there.
    if (measurable) step /= opts.step_shrink;
  }

  res.beta_hat = x;
  res.objective = obj;
  res.iterations = it;
  if (!res.converged) res.kkt_residual = kkt_from_gradient(g, x, lambda);
  return res;
}

FitResult fit_lasso(const Dataset& d, double lambda, const SolverOptions& opts) {
  return fit_lasso(PartialLikelihood(d), lambda, opts);
}

std::vector<FitResult> fit_path(const PartialLikelihood& pl, const std::vector<double>& lambdas,
                                const SolverOptions& opts) {
  if (lambdas.empty()) throw std::invalid_argument("fit_path: empty lambda sequence");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] > 0.0) || !std::isfinite(lambdas[k])) {
      throw std::invalid_argument("fit_path: lambdas must be positive and finite");
    }
    if (k > 0 && !(lambdas[k] < lambdas[k - 1])) {
      throw std::invalid_argument("fit_path: lambdas must be strictly decreasing");
    }
  }
  std::vector<FitResult> out;
  out.reserve(lambdas.size());
  SolverOptions step_opts = opts;
  for (double lambda : lambdas) {
    out.push_back(fit_lasso(pl, lambda, step_opts));
    step_opts.warm_start = out.back().beta_hat;
  }
  return out;
}

std::vector<FitResult> fit_path(const Dataset& d, const std::vector<double>& lambdas,
                                const SolverOptions& opts) {
  return fit_path(PartialLikelihood(d), lambdas, opts);
}

double lambda_max(const PartialLikelihood& pl) {
  return pl.gradient(Eigen::VectorXd::Zero(pl.p())).lpNorm<Eigen::Infinity>();
}

double theoretical_lambda(int n, int p, double k_bound, double xi, double eps) {
  if (n < 1 || p < 1) throw std::invalid_argument("theoretical_lambda: need n >= 1 and p >= 1");
  if (!(k_bound > 0.0)) throw std::invalid_argument("theoretical_lambda: K must be positive");
  if (!(xi > 1.0)) throw std::invalid_argument("theoretical_lambda: xi must exceed 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("theoretical_lambda: eps in (0,1)");
  return (xi + 1.0) / (xi - 1.0) * k_bound * std::sqrt(2.0 / n * std::log(2.0 * p / eps));
}

}  // namespace coxlasso
