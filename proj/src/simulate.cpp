#include "coxlasso/simulate.hpp"

#include "coxlasso/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coxlasso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Subject draw_subject(const SimConfig& cfg, int index, int attempt) {
  CounterRng rng(derive_stream(cfg.seed, static_cast<std::uint64_t>(index),
                               static_cast<std::uint64_t>(attempt)));

  // Fixed draw order: censoring, event target, then covariate levels as the
  // inversion walk needs them. Substream isolation makes the subject's draw
  // reproducible no matter what the other subjects do.
  const double censor = cfg.censor_rate > 0.0 ? rng.exponential(cfg.censor_rate) : kInf;
  const double horizon = std::min(censor, cfg.admin_time);
  const double target = rng.exponential(1.0);

  auto draw_level = [&] {
    Eigen::VectorXd v(cfg.p);
    for (int j = 0; j < cfg.p; ++j) v[j] = rng.uniform(-cfg.k_bound / 2.0, cfg.k_bound / 2.0);
    return v;
  };

  CovariatePath path;
  path.values.push_back(draw_level());

  // Invert the cumulative intensity segment by segment. Segments are the
  // covariate path's constancy intervals; for the piecewise law they are
  // drawn lazily as the walk advances, so the subject's stream is consumed
  // in a deterministic order.
  const BaselineHazard& base = cfg.baseline;
  double event_time = kInf;
  double seg_lo = 0.0;
  std::size_t seg = 0;
  double acc = 0.0;  // intensity mass consumed so far
  for (;;) {
    double seg_hi = kInf;
    if (cfg.covariate_law == CovariateLaw::PiecewiseUniform) {
      if (seg == path.breakpoints.size()) {
        path.breakpoints.push_back(seg_lo + rng.exponential(cfg.jump_rate));
        path.values.push_back(draw_level());
      }
      seg_hi = path.breakpoints[seg];
    }

    const double factor = std::exp(path.values[seg].dot(cfg.beta_true));
    const double lam_lo = base.cumulative(seg_lo);
    const double lam_hi = base.cumulative(seg_hi);
    if (lam_hi > lam_lo) {
      const double need = lam_lo + (target - acc) / factor;
      if (need <= lam_hi) {
        // Lands in this segment. The clamp only matters when rounding puts
        // the root a hair before the segment start.
        event_time = std::max(base.inverse_cumulative(need), seg_lo);
        break;
      }
      acc += factor * (lam_hi - lam_lo);
    }

    if (seg_hi == kInf) break;  // unbounded final segment exhausted, no event
    seg_lo = seg_hi;
    ++seg;
    if (seg_lo >= horizon) break;  // anything later is censored anyway
  }

  Subject s;
  s.at_risk_start = 0.0;
  if (event_time <= horizon) {
    s.event_time = event_time;
    s.at_risk_end = event_time;
  } else {
    // No event by the horizon. A bounded baseline that never reaches the
    // target is the same outcome: censored at the horizon.
    s.at_risk_end = horizon;
  }

  // Drop path segments that start at or after the observation end; they were
  // never observable. The last kept value extends past the end by the step
  // convention, so lookups within the window are unchanged.
  std::size_t keep = 0;
  while (keep < path.breakpoints.size() && path.breakpoints[keep] < s.at_risk_end) ++keep;
  path.breakpoints.resize(keep);
  path.values.resize(keep + 1);
  s.path = std::move(path);
  return s;
}

}  // namespace

Dataset simulate_dataset(const SimConfig& cfg, SimulationLog* log) {
  cfg.check();

  Dataset d;
  d.p = cfg.p;
  d.k_bound = cfg.k_bound;
  d.subjects.resize(static_cast<std::size_t>(cfg.n));
  std::vector<int> attempt(static_cast<std::size_t>(cfg.n), 0);
  for (int i = 0; i < cfg.n; ++i) {
    d.subjects[static_cast<std::size_t>(i)] = draw_subject(cfg, i, 0);
  }

  // Exact ties between event times break the one-jump-at-a-time assumption.
  // Redraw the higher-indexed subject of the earliest tied pair until the
  // event times are distinct; each redraw uses a fresh substream.
  int resamples = 0;
  for (;;) {
    auto events = sorted_events(d);
    int clash = -1;
    for (std::size_t k = 1; k < events.size(); ++k) {
      if (events[k].first == events[k - 1].first) {
        clash = std::max(events[k - 1].second, events[k].second);
        break;
      }
    }
    if (clash < 0) break;
    if (++attempt[static_cast<std::size_t>(clash)] > 1000) {
      throw std::runtime_error("simulate_dataset: could not break an event-time tie");
    }
    d.subjects[static_cast<std::size_t>(clash)] =
        draw_subject(cfg, clash, attempt[static_cast<std::size_t>(clash)]);
    ++resamples;
  }

  if (log) {
    log->tie_resamples = resamples;
    log->events = 0;
    for (const Subject& s : d.subjects) log->events += s.has_event() ? 1 : 0;
    log->censored = cfg.n - log->events;
  }
  return d;
}

double true_intensity_integral(const Subject& s, const Eigen::VectorXd& beta,
                               const BaselineHazard& baseline, double t) {
  if (s.path.dim() != beta.size()) {
    throw std::invalid_argument("true_intensity_integral: beta length does not match covariates");
  }
  const double hi_cap = std::min(t, s.at_risk_end);
  if (!(hi_cap > s.at_risk_start)) return 0.0;

  const auto& bp = s.path.breakpoints;
  double lo = s.at_risk_start;
  // Index of the value in force just after lo.
  std::size_t idx = static_cast<std::size_t>(std::upper_bound(bp.begin(), bp.end(), lo) - bp.begin());
  double acc = 0.0;
  while (lo < hi_cap) {
    const double seg_hi = idx < bp.size() ? std::min(bp[idx], hi_cap) : hi_cap;
    acc += std::exp(s.path.values[idx].dot(beta)) *
           (baseline.cumulative(seg_hi) - baseline.cumulative(lo));
    lo = seg_hi;
    ++idx;
  }
  return acc;
}

}  // namespace coxlasso
