#include "coxlasso/survival_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace coxlasso {

const Eigen::VectorXd& CovariatePath::value_at(double t) const {
  if (values.empty()) throw std::logic_error("CovariatePath::value_at: path has no values");
  // Number of breakpoints strictly below t selects the segment; a breakpoint
  // itself still belongs to the segment it closes.
  const auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), t);
  return values[static_cast<std::size_t>(it - breakpoints.begin())];
}

double CovariatePath::max_abs() const {
  double m = 0.0;
  for (const auto& v : values) {
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  }
  return m;
}

namespace {

std::string describe(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

void check_subject_shape(const Dataset& d, int i, ValidationReport& report) {
  const Subject& s = d.subjects[static_cast<std::size_t>(i)];
  const CovariatePath& path = s.path;

  if (path.values.empty() || path.values.size() != path.breakpoints.size() + 1) {
    report.violations.push_back({Violation::Kind::BadPath, i, -1,
                                 "subject " + std::to_string(i) +
                                     ": path must have one more value block than breakpoints"});
    return;
  }
  for (const auto& v : path.values) {
    if (v.size() != d.p) {
      report.violations.push_back({Violation::Kind::DimensionMismatch, i, -1,
                                   "subject " + std::to_string(i) + ": covariate block has " +
                                       std::to_string(v.size()) + " entries, expected " +
                                       std::to_string(d.p)});
      return;
    }
    if (!v.allFinite()) {
      report.violations.push_back({Violation::Kind::BadPath, i, -1,
                                   "subject " + std::to_string(i) + ": non-finite covariate value"});
      return;
    }
  }
  for (std::size_t k = 0; k < path.breakpoints.size(); ++k) {
    const double b = path.breakpoints[k];
    if (!std::isfinite(b) || (k > 0 && b <= path.breakpoints[k - 1])) {
      report.violations.push_back({Violation::Kind::BadPath, i, -1,
                                   "subject " + std::to_string(i) +
                                       ": breakpoints must be finite and strictly increasing"});
      return;
    }
  }

  if (std::isnan(s.at_risk_start) || std::isnan(s.at_risk_end) ||
      !(s.at_risk_start < s.at_risk_end)) {
    report.violations.push_back({Violation::Kind::BadInterval, i, -1,
                                 "subject " + std::to_string(i) + ": at-risk window (" +
                                     describe(s.at_risk_start) + ", " + describe(s.at_risk_end) +
                                     "] is empty"});
    return;
  }

  if (s.event_time) {
    const double e = *s.event_time;
    if (!std::isfinite(e) || !(s.at_risk_start < e && e <= s.at_risk_end)) {
      report.violations.push_back({Violation::Kind::EventOutsideRisk, i, -1,
                                   "subject " + std::to_string(i) + ": event at " + describe(e) +
                                       " outside at-risk window (" + describe(s.at_risk_start) +
                                       ", " + describe(s.at_risk_end) + "]"});
    }
  }
}

// Exact pairwise spread check for step paths: on the union of the two
// subjects' breakpoints both paths are constant per interval, so evaluating
// at each interval is exact.
void check_pairwise_bound(const Dataset& d, ValidationReport& report) {
  const int n = d.n();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const CovariatePath& a = d.subjects[static_cast<std::size_t>(i)].path;
      const CovariatePath& b = d.subjects[static_cast<std::size_t>(j)].path;
      std::vector<double> cuts;
      cuts.reserve(a.breakpoints.size() + b.breakpoints.size() + 1);
      cuts.insert(cuts.end(), a.breakpoints.begin(), a.breakpoints.end());
      cuts.insert(cuts.end(), b.breakpoints.begin(), b.breakpoints.end());
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      // One probe per interval: each breakpoint closes the interval before it,
      // and one more probe covers the tail after the last breakpoint.
      cuts.push_back(cuts.empty() ? 1.0 : cuts.back() + 1.0);

      double worst = 0.0;
      for (double t : cuts) {
        worst = std::max(worst, (a.value_at(t) - b.value_at(t)).cwiseAbs().maxCoeff());
      }
      if (worst > d.k_bound) {
        report.violations.push_back({Violation::Kind::BoundExceeded, i, j,
                                     "subjects " + std::to_string(i) + " and " + std::to_string(j) +
                                         ": covariate spread " + describe(worst) + " exceeds K = " +
                                         describe(d.k_bound)});
      }
    }
  }
}

}  // namespace

ValidationReport validate_dataset(const Dataset& d, bool pairwise_only) {
  ValidationReport report;
  if (d.p <= 0) {
    report.violations.push_back(
        {Violation::Kind::DimensionMismatch, -1, -1, "dataset: p must be positive"});
    return report;
  }
  if (!(d.k_bound > 0.0) || !std::isfinite(d.k_bound)) {
    report.violations.push_back(
        {Violation::Kind::BoundExceeded, -1, -1, "dataset: K must be positive and finite"});
    return report;
  }

  const int n = d.n();
  for (int i = 0; i < n; ++i) check_subject_shape(d, i, report);
  if (!report.ok()) return report;  // shape errors make the other checks meaningless

  // Exactly tied event times break the no-simultaneous-jumps assumption.
  auto events = sorted_events(d);
  for (std::size_t k = 1; k < events.size(); ++k) {
    if (events[k].first == events[k - 1].first) {
      report.violations.push_back({Violation::Kind::TiedEvents, events[k - 1].second,
                                   events[k].second,
                                   "subjects " + std::to_string(events[k - 1].second) + " and " +
                                       std::to_string(events[k].second) + " share event time " +
                                       describe(events[k].first)});
    }
  }

  if (pairwise_only) {
    check_pairwise_bound(d, report);
  } else {
    // Per-coordinate form: sup_t |Z_j(t)| <= K/2, which implies the pairwise
    // spread bound by the triangle inequality.
    for (int i = 0; i < n; ++i) {
      const double m = d.subjects[static_cast<std::size_t>(i)].path.max_abs();
      if (m > d.k_bound / 2.0) {
        report.violations.push_back({Violation::Kind::BoundExceeded, i, -1,
                                     "subject " + std::to_string(i) + ": |covariate| reaches " +
                                         describe(m) + ", limit K/2 = " +
                                         describe(d.k_bound / 2.0)});
      }
    }
  }
  return report;
}

const Eigen::VectorXd& covariate_at(const Dataset& d, int subject, double t) {
  if (subject < 0 || subject >= d.n()) {
    throw std::out_of_range("covariate_at: subject index " + std::to_string(subject) +
                            " out of range for n = " + std::to_string(d.n()));
  }
  return d.subjects[static_cast<std::size_t>(subject)].path.value_at(t);
}

std::vector<std::pair<double, int>> sorted_events(const Dataset& d) {
  std::vector<std::pair<double, int>> events;
  for (int i = 0; i < d.n(); ++i) {
    const Subject& s = d.subjects[static_cast<std::size_t>(i)];
    if (s.event_time) events.emplace_back(*s.event_time, i);
  }
  std::sort(events.begin(), events.end());
  return events;
}

double eta_b(const Dataset& d, const Eigen::VectorXd& b) {
  const int n = d.n();
  if (n == 0) return 0.0;
  for (const Subject& s : d.subjects) {
    if (s.path.dim() != b.size()) {
      throw std::invalid_argument("eta_b: direction length does not match covariate dimension");
    }
  }

  std::vector<double> cuts;
  for (const Subject& s : d.subjects) {
    cuts.insert(cuts.end(), s.path.breakpoints.begin(), s.path.breakpoints.end());
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(cuts.empty() ? 1.0 : cuts.back() + 1.0);  // tail interval probe

  // All paths are constant between consecutive cuts, so the sup over time is
  // the max over these probes of (max_i - min_i) of the projections.
  double eta = 0.0;
  for (double t : cuts) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Subject& s : d.subjects) {
      const double proj = b.dot(s.path.value_at(t));
      lo = std::min(lo, proj);
      hi = std::max(hi, proj);
    }
    eta = std::max(eta, hi - lo);
  }
  return eta;
}

}  // namespace coxlasso
