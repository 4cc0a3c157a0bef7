#include "jointrait/longitudinal.hpp"

#include <cmath>
#include <numbers>

namespace jointrait {

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double normal_log_density(double y, double mean, double sd) {
  const double z = (y - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

// P(y = l) for thresholds x_lo < x_hi on the logit scale. The complement form
// keeps precision when both cumulative probabilities are close to 1.
double category_prob(double x_lo, double x_hi, bool has_lo, bool has_hi) {
  if (!has_lo) return has_hi ? expit(x_hi) : 1.0;
  if (!has_hi) return expit(-x_lo);
  if (x_lo > 0.0) return expit(-x_lo) - expit(-x_hi);
  return expit(x_hi) - expit(x_lo);
}

double logistic_density(double x) { return expit(x) * expit(-x); }

}  // namespace

double OutcomeDistribution::log_prob(double y) const {
  switch (kind) {
    case OutcomeKind::continuous: return normal_log_density(y, mean, sd);
    case OutcomeKind::binary: return y == 1.0 ? std::log(p_one) : std::log1p(-p_one);
    case OutcomeKind::ordinal: {
      const auto l = static_cast<std::size_t>(y);
      return std::log(std::max(category_probs.at(l - 1), kProbabilityFloor));
    }
  }
  return 0.0;
}

OutcomeDistribution outcome_distribution(const ModelSpec& spec, int k, double theta, const ParameterDraw& draw) {
  const auto& o = spec.outcomes[k];
  OutcomeDistribution d;
  d.kind = o.kind;
  const auto& a = draw.a[k];
  const double b = draw.b[k];
  switch (o.kind) {
    case OutcomeKind::continuous:
      d.mean = a[0] + b * theta;
      d.sd = draw.sigma_eps[k];
      break;
    case OutcomeKind::binary: d.p_one = expit(a[0] + b * theta); break;
    case OutcomeKind::ordinal: {
      const int n = o.n_categories;
      d.category_probs.resize(n);
      for (int l = 1; l <= n; ++l) {
        const bool has_lo = l > 1, has_hi = l < n;
        const double x_lo = has_lo ? a[l - 2] - b * theta : 0.0;
        const double x_hi = has_hi ? a[l - 1] - b * theta : 0.0;
        d.category_probs[l - 1] = category_prob(x_lo, x_hi, has_lo, has_hi);
      }
      break;
    }
  }
  return d;
}

double observation_log_prob(const OutcomeSpec& outcome, std::span<const double> a, double b, double sigma,
                            double theta, double y) {
  switch (outcome.kind) {
    case OutcomeKind::continuous: return normal_log_density(y, a[0] + b * theta, sigma);
    case OutcomeKind::binary: {
      const double eta = a[0] + b * theta;
      return y * eta - softplus(eta);
    }
    case OutcomeKind::ordinal: {
      const int n = outcome.n_categories;
      const int l = static_cast<int>(y);
      const bool has_lo = l > 1, has_hi = l < n;
      const double x_lo = has_lo ? a[l - 2] - b * theta : 0.0;
      const double x_hi = has_hi ? a[l - 1] - b * theta : 0.0;
      return std::log(std::max(category_prob(x_lo, x_hi, has_lo, has_hi), kProbabilityFloor));
    }
  }
  return 0.0;
}

ObservationTerm observation_term(const OutcomeSpec& outcome, std::span<const double> a, double b, double sigma,
                                 double theta, double y) {
  ObservationTerm t;
  switch (outcome.kind) {
    case OutcomeKind::continuous: {
      const double mu = a[0] + b * theta;
      const double var = sigma * sigma;
      const double r = y - mu;
      t.value = normal_log_density(y, mu, sigma);
      const double d_mu = r / var;
      t.d_theta = b * d_mu;
      t.d_a = d_mu;
      t.d_b = theta * d_mu;
      t.d_var = -0.5 / var + 0.5 * r * r / (var * var);
      break;
    }
    case OutcomeKind::binary: {
      const double eta = a[0] + b * theta;
      t.value = y * eta - softplus(eta);
      const double r = y - expit(eta);
      t.d_theta = b * r;
      t.d_a = r;
      t.d_b = theta * r;
      break;
    }
    case OutcomeKind::ordinal: {
      const int n = outcome.n_categories;
      const int l = static_cast<int>(y);
      const bool has_lo = l > 1, has_hi = l < n;
      const double x_lo = has_lo ? a[l - 2] - b * theta : 0.0;
      const double x_hi = has_hi ? a[l - 1] - b * theta : 0.0;
      const double p = category_prob(x_lo, x_hi, has_lo, has_hi);
      if (has_lo) t.a_lo_index = l - 2;
      if (has_hi) t.a_hi_index = l - 1;
      if (p < kProbabilityFloor) {
        // Floored: the value is constant locally.
        t.value = std::log(kProbabilityFloor);
        break;
      }
      t.value = std::log(p);
      const double f_lo = has_lo ? logistic_density(x_lo) / p : 0.0;
      const double f_hi = has_hi ? logistic_density(x_hi) / p : 0.0;
      t.d_a_hi = f_hi;
      t.d_a_lo = -f_lo;
      t.d_theta = -b * (f_hi - f_lo);
      t.d_b = -theta * (f_hi - f_lo);
      break;
    }
  }
  return t;
}

double longitudinal_loglik(const SubjectRecord& subject, const ParameterDraw& draw, const SubjectEffects& effects,
                           const ModelSpec& spec) {
  if (subject.visits.empty()) return 0.0;
  const auto rows = DesignRows::build(subject.covariates, spec.design);
  const auto lt = LinearTrait::from(rows, draw.beta, effects.u);
  const auto& knots = spec.design.theta_knots;
  double total = 0.0;
  for (const auto& v : subject.visits) {
    const double theta = lt.at(v.time, draw.zeta, knots);
    for (int k = 0; k < spec.n_outcomes(); ++k) {
      if (!v.values[k]) continue;
      total += observation_log_prob(spec.outcomes[k], draw.a[k], draw.b[k], draw.sigma_eps[k], theta, *v.values[k]);
    }
  }
  return total;
}

}  // namespace jointrait
