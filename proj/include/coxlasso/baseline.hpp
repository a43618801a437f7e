#pragma once

#include <vector>

namespace coxlasso {

/*
 * Baseline cumulative hazard Lambda0. Three shapes:
 *   Constant           Lambda0(t) = rate * t
 *   PiecewiseConstant  rates[k] on (grid[k-1], grid[k]], rates.back() after
 *   Weibull            Lambda0(t) = (t / scale)^shape
 *
 * inverse_cumulative(u) returns the smallest t with Lambda0(t) >= u, which is
 * what closed-form event-time inversion needs; it is +inf when the total mass
 * never reaches u (possible for a piecewise baseline with a zero tail rate).
 */
struct BaselineHazard {
  enum class Kind { Constant, PiecewiseConstant, Weibull };

  Kind kind = Kind::Constant;
  double rate = 1.0;          // Constant
  std::vector<double> grid;   // PiecewiseConstant: 0 < grid[0] < grid[1] < ...
  std::vector<double> rates;  // grid.size() + 1 entries, all >= 0
  double shape = 1.0;         // Weibull
  double scale = 1.0;

  double cumulative(double t) const;
  double inverse_cumulative(double u) const;

  // Throws std::invalid_argument when the shape parameters are unusable.
  void check() const;
};

}  // namespace coxlasso
