#pragma once

#include <span>
#include <vector>

#include "jointrait/data.hpp"
#include "jointrait/latent_trait.hpp"
#include "jointrait/model_spec.hpp"
#include "jointrait/parameters.hpp"

namespace jointrait {

/// Floor applied to ordinal category probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-300;

struct OutcomeDistribution {
  OutcomeKind kind = OutcomeKind::continuous;
  double mean = 0.0;  // continuous
  double sd = 0.0;    // continuous
  double p_one = 0.0;  // binary: P(y = 1)
  std::vector<double> category_probs;  // ordinal: P(y = l), l = 1..n_k

  double log_prob(double y) const;
};

/// Level-1 measurement model of outcome `k` at latent value θ.
OutcomeDistribution outcome_distribution(const ModelSpec& spec, int k, double theta, const ParameterDraw& draw);

/// Σ_j Σ_k log p(y_ijk | θ_i(t_ij)). Missing values contribute nothing.
double longitudinal_loglik(const SubjectRecord& subject, const ParameterDraw& draw, const SubjectEffects& effects,
                           const ModelSpec& spec);

double expit(double x);
/// log(1 + e^x) without overflow.
double softplus(double x);

/// Log probability of one observed value together with its partial
/// derivatives. For ordinal outcomes `d_a_lo`/`d_a_hi` refer to thresholds
/// `a_lo_index`/`a_hi_index` (-1 when the bound is ±∞).
struct ObservationTerm {
  double value = 0.0;
  double d_theta = 0.0;
  double d_a = 0.0;  // continuous/binary intercept
  double d_b = 0.0;
  double d_var = 0.0;  // continuous: ∂/∂σ²
  int a_lo_index = -1;
  int a_hi_index = -1;
  double d_a_lo = 0.0;
  double d_a_hi = 0.0;
};

/// Value only; the fast path used inside the sampler.
double observation_log_prob(const OutcomeSpec& outcome, std::span<const double> a, double b, double sigma,
                            double theta, double y);
ObservationTerm observation_term(const OutcomeSpec& outcome, std::span<const double> a, double b, double sigma,
                                 double theta, double y);

}  // namespace jointrait
