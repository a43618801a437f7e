#include "coxlasso/baseline.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace coxlasso {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void BaselineHazard::check() const {
  switch (kind) {
    case Kind::Constant:
      if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw std::invalid_argument("baseline: constant rate must be finite and >= 0");
      }
      return;
    case Kind::PiecewiseConstant: {
      if (rates.size() != grid.size() + 1) {
        throw std::invalid_argument("baseline: need one more rate than grid points");
      }
      double prev = 0.0;
      for (double g : grid) {
        if (!(g > prev) || !std::isfinite(g)) {
          throw std::invalid_argument("baseline: grid must be positive and strictly increasing");
        }
        prev = g;
      }
      for (double r : rates) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
          throw std::invalid_argument("baseline: rates must be finite and >= 0");
        }
      }
      return;
    }
    case Kind::Weibull:
      if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
        throw std::invalid_argument("baseline: Weibull needs positive finite shape and scale");
      }
      return;
  }
  throw std::invalid_argument("baseline: unknown kind");
}

double BaselineHazard::cumulative(double t) const {
  if (!(t > 0.0)) return 0.0;
  switch (kind) {
    case Kind::Constant:
      if (std::isinf(t)) return rate > 0.0 ? kInf : 0.0;  // avoid 0 * inf
      return rate * t;
    case Kind::PiecewiseConstant: {
      double acc = 0.0;
      double prev = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (t <= grid[k]) return acc + rates[k] * (t - prev);
        acc += rates[k] * (grid[k] - prev);
        prev = grid[k];
      }
      if (std::isinf(t)) return rates.back() > 0.0 ? kInf : acc;
      return acc + rates.back() * (t - prev);
    }
    case Kind::Weibull:
      return std::pow(t / scale, shape);
  }
  return 0.0;
}

double BaselineHazard::inverse_cumulative(double u) const {
  if (!(u > 0.0)) return 0.0;
  switch (kind) {
    case Kind::Constant:
      return rate > 0.0 ? u / rate : kInf;
    case Kind::PiecewiseConstant: {
      double acc = 0.0;
      double prev = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (acc >= u) return prev;  // mass already reached at a boundary
        const double seg = rates[k] * (grid[k] - prev);
        if (rates[k] > 0.0 && acc + seg >= u) return prev + (u - acc) / rates[k];
        acc += seg;
        prev = grid[k];
      }
      if (acc >= u) return prev;
      return rates.back() > 0.0 ? prev + (u - acc) / rates.back() : kInf;
    }
    case Kind::Weibull:
      return scale * std::pow(u, 1.0 / shape);
  }
  return kInf;
}

}  // namespace coxlasso
