#pragma once

#include "coxlasso/sim_config.hpp"
#include "coxlasso/survival_data.hpp"

namespace coxlasso {

struct SimulationLog {
  int tie_resamples = 0;  // subjects redrawn to break exactly tied event times
  int events = 0;
  int censored = 0;
};

/*
 * Draws a dataset from the intensity model: subject i enters at time 0 and
 * leaves at the earliest of the event, exponential censoring, and the
 * administrative horizon. The event time solves
 *
 *   int_0^T exp(Z_i(s)' beta_true) dLambda0(s) = E,   E ~ Exp(1),
 *
 * segment by segment in closed form through Lambda0 and its inverse, so the
 * draw carries no discretization error. When Lambda0 is bounded and E is
 * never reached the subject is censored at the horizon; that is a valid
 * outcome, not an error.
 *
 * Subject i on attempt a consumes only the (seed, i, a) substream, which
 * makes output independent of evaluation order and thread count. If two
 * subjects land on exactly the same event time, the higher-indexed one is
 * redrawn on attempt a+1 until event times are distinct.
 */
Dataset simulate_dataset(const SimConfig& cfg, SimulationLog* log = nullptr);

// Integral of one subject's intensity over (0, t]:
// int Y(s) exp(Z(s)' beta) dLambda0(s), evaluated exactly on the path's
// segments. This is the compensator of the subject's counting process.
double true_intensity_integral(const Subject& s, const Eigen::VectorXd& beta,
                               const BaselineHazard& baseline, double t);

}  // namespace coxlasso
