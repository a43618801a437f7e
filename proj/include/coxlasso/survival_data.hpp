#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace coxlasso {

/*
 * One subject's covariate process as a step function on (0, inf).
 * values[k] is in force on (breakpoints[k-1], breakpoints[k]]; values.front()
 * applies up to and including breakpoints[0], values.back() after the last
 * breakpoint. The left-continuous convention keeps the process predictable:
 * the value used at an event time t is the level that was in force just
 * before and at t, never a level that switches on at t.
 */
struct CovariatePath {
  std::vector<double> breakpoints;      // strictly increasing, may be empty
  std::vector<Eigen::VectorXd> values;  // breakpoints.size() + 1 entries

  int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }

  // Value in force at time t (left-continuous step lookup).
  const Eigen::VectorXd& value_at(double t) const;

  // sup over time and coordinates of |Z_j(t)|.
  double max_abs() const;
};

struct Subject {
  double at_risk_start = 0.0;
  double at_risk_end = 0.0;          // at risk on (at_risk_start, at_risk_end]
  std::optional<double> event_time;  // at most one event per subject
  CovariatePath path;

  bool at_risk(double t) const { return at_risk_start < t && t <= at_risk_end; }
  bool has_event() const { return event_time.has_value(); }
};

struct Dataset {
  int p = 0;             // covariate dimension
  double k_bound = 0.0;  // K, the pairwise covariate spread bound
  std::vector<Subject> subjects;

  int n() const { return static_cast<int>(subjects.size()); }
};

struct Violation {
  enum class Kind {
    DimensionMismatch,  // path value length != p, or ragged path shape
    BadPath,            // breakpoints not strictly increasing, non-finite values
    BadInterval,        // at-risk window empty or reversed
    EventOutsideRisk,   // event time outside (start, end]
    TiedEvents,         // two subjects share an event time exactly
    BoundExceeded,      // covariate bound violated
  };
  Kind kind;
  int subject = -1;  // primary offender, -1 when dataset-wide
  int other = -1;    // second subject for pairwise violations
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/*
 * Checks the structural invariants: consistent path shapes, strictly
 * increasing breakpoints, finite values, event times inside the at-risk
 * window, no exactly tied event times, and the covariate bound.
 *
 * By default every coordinate must satisfy sup_t |Z_j(t)| <= K/2, which
 * implies the pairwise spread bound max_{i,i'} sup_t max_j
 * |Z_{i,j}(t) - Z_{i',j}(t)| <= K that the tail inequalities use. A dataset
 * that only satisfies the pairwise form can be accepted with
 * pairwise_only = true; that check compares every subject pair on the union
 * of their breakpoints, which is exact for step paths.
 */
ValidationReport validate_dataset(const Dataset& d, bool pairwise_only = false);

// Covariate value of one subject at time t. Throws std::out_of_range for a
// bad subject index.
const Eigen::VectorXd& covariate_at(const Dataset& d, int subject, double t);

// Event times sorted ascending, paired with the owning subject index.
std::vector<std::pair<double, int>> sorted_events(const Dataset& d);

// Exact sup over s of the spread max_{i,j} |b'Z_i(s) - b'Z_j(s)|, evaluated
// on the union of all subjects' breakpoints. This is the coupling constant
// the divergence sandwich bounds depend on; it is at most K * |b|_1 for a
// valid dataset.
double eta_b(const Dataset& d, const Eigen::VectorXd& b);

}  // namespace coxlasso
