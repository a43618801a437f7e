#include "coxlasso/partial_likelihood.hpp"

#include "coxlasso/numeric_text.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace coxlasso {

empty_risk_set_error::empty_risk_set_error(double t)
    : std::runtime_error("empty risk set at t = " + format_double(t)), time(t) {}

RiskSetMoments risk_set_moments(const Dataset& d, double t, const Eigen::VectorXd& beta) {
  if (beta.size() != d.p) {
    throw std::invalid_argument("risk_set_moments: beta length does not match p");
  }
  const int n = d.n();

  // Gather at-risk covariates and linear predictors.
  std::vector<const Eigen::VectorXd*> z;
  std::vector<double> a;
  z.reserve(static_cast<std::size_t>(n));
  a.reserve(static_cast<std::size_t>(n));
  for (const Subject& s : d.subjects) {
    if (!s.at_risk(t)) continue;
    const Eigen::VectorXd& zi = s.path.value_at(t);
    z.push_back(&zi);
    a.push_back(zi.dot(beta));
  }
  if (z.empty()) throw empty_risk_set_error(t);

  double m = a[0];
  for (double ai : a) m = std::max(m, ai);

  RiskSetMoments out;
  out.at_risk = static_cast<int>(z.size());
  out.s1 = Eigen::VectorXd::Zero(d.p);
  out.s2 = Eigen::MatrixXd::Zero(d.p, d.p);
  out.zbar = Eigen::VectorXd::Zero(d.p);
  out.v = Eigen::MatrixXd::Zero(d.p, d.p);

  // Scaled pass first: weights e^{a_i - m} never overflow.
  double s0s = 0.0;
  Eigen::VectorXd s1s = Eigen::VectorXd::Zero(d.p);
  Eigen::MatrixXd s2s = Eigen::MatrixXd::Zero(d.p, d.p);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double w = std::exp(a[i] - m);
    s0s += w;
    s1s.noalias() += w * (*z[i]);
    s2s.noalias() += w * (*z[i]) * z[i]->transpose();
  }
  out.zbar = s1s / s0s;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double w = std::exp(a[i] - m) / s0s;
    const Eigen::VectorXd c = *z[i] - out.zbar;
    out.v.noalias() += w * c * c.transpose();
  }
  // Unscale for the raw moments; these track the definition even when the
  // common factor e^m is large.
  const double scale = std::exp(m) / n;
  out.r = s0s * scale;
  out.s1 = s1s * scale;
  out.s2 = s2s * scale;
  return out;
}

PartialLikelihood::PartialLikelihood(const Dataset& d) : n_(d.n()), p_(d.p) {
  if (n_ == 0) throw std::invalid_argument("PartialLikelihood: empty dataset");
  const auto events = sorted_events(d);
  events_.reserve(events.size());
  for (const auto& [t, idx] : events) {
    EventBlock block;
    block.time = t;
    block.z_event = d.subjects[static_cast<std::size_t>(idx)].path.value_at(t);

    int at_risk = 0;
    for (const Subject& s : d.subjects) at_risk += s.at_risk(t) ? 1 : 0;
    if (at_risk == 0) throw empty_risk_set_error(t);
    block.z_risk.resize(at_risk, p_);
    int row = 0;
    for (const Subject& s : d.subjects) {
      if (s.at_risk(t)) block.z_risk.row(row++) = s.path.value_at(t).transpose();
    }
    events_.push_back(std::move(block));
  }
}

void PartialLikelihood::check_beta(const Eigen::VectorXd& beta) const {
  if (beta.size() != p_) {
    throw std::invalid_argument("PartialLikelihood: beta length does not match p");
  }
}

double PartialLikelihood::value(const Eigen::VectorXd& beta) const {
  check_beta(beta);
  double acc = 0.0;
  Eigen::VectorXd a;
  for (const EventBlock& e : events_) {
    a.noalias() = e.z_risk * beta;
    const double m = a.maxCoeff();
    const double lse = m + std::log((a.array() - m).exp().sum());
    acc += e.z_event.dot(beta) - lse;
  }
  return -acc / n_;
}

double PartialLikelihood::value_and_gradient(const Eigen::VectorXd& beta,
                                             Eigen::VectorXd& grad) const {
  check_beta(beta);
  double acc = 0.0;
  grad = Eigen::VectorXd::Zero(p_);
  Eigen::VectorXd a, w;
  for (const EventBlock& e : events_) {
    a.noalias() = e.z_risk * beta;
    const double m = a.maxCoeff();
    w = (a.array() - m).exp();
    const double s = w.sum();
    acc += e.z_event.dot(beta) - (m + std::log(s));
    grad.noalias() -= e.z_event - e.z_risk.transpose() * (w / s);
  }
  grad /= n_;
  return -acc / n_;
}

Eigen::VectorXd PartialLikelihood::gradient(const Eigen::VectorXd& beta) const {
  Eigen::VectorXd g;
  value_and_gradient(beta, g);
  return g;
}

Eigen::MatrixXd PartialLikelihood::hessian_up_to(const Eigen::VectorXd& beta,
                                                 double t_star) const {
  check_beta(beta);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p_, p_);
  Eigen::VectorXd a, w, zbar;
  Eigen::MatrixXd centered;
  for (const EventBlock& e : events_) {
    if (e.time > t_star) break;  // events_ sorted by time
    a.noalias() = e.z_risk * beta;
    const double m = a.maxCoeff();
    w = (a.array() - m).exp();
    w /= w.sum();
    zbar.noalias() = e.z_risk.transpose() * w;
    centered = e.z_risk.rowwise() - zbar.transpose();
    h.noalias() += centered.transpose() * w.asDiagonal() * centered;
  }
  h /= n_;
  return ((h + h.transpose()) / 2.0).eval();
}

Eigen::MatrixXd PartialLikelihood::hessian(const Eigen::VectorXd& beta) const {
  return hessian_up_to(beta, std::numeric_limits<double>::infinity());
}

double PartialLikelihood::bregman(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2) const {
  Eigen::VectorXd g1, g2;
  value_and_gradient(b1, g1);
  value_and_gradient(b2, g2);
  return (b1 - b2).dot(g1 - g2);
}

double neg_log_partial_likelihood(const Dataset& d, const Eigen::VectorXd& beta) {
  return PartialLikelihood(d).value(beta);
}

Eigen::VectorXd gradient(const Dataset& d, const Eigen::VectorXd& beta) {
  return PartialLikelihood(d).gradient(beta);
}

Eigen::MatrixXd hessian(const Dataset& d, const Eigen::VectorXd& beta) {
  return PartialLikelihood(d).hessian(beta);
}

double bregman_divergence(const Dataset& d, const Eigen::VectorXd& b1, const Eigen::VectorXd& b2) {
  return PartialLikelihood(d).bregman(b1, b2);
}

}  // namespace coxlasso
