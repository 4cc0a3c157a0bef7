#pragma once

#include <stdexcept>
#include <vector>

#include "jointrait/data.hpp"
#include "jointrait/latent_trait.hpp"
#include "jointrait/model_spec.hpp"
#include "jointrait/parameters.hpp"

namespace jointrait {

/// log h(s) = intercept + slope * s on [t_lo, t_hi].
struct HazardSegment {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double intercept = 0.0;
  double slope = 0.0;
};

/// Raised when exp() of a segment's log-hazard overflows. Such draws are
/// rejected by the sampler and skipped by prediction.
class HazardOverflow : public std::runtime_error {
 public:
  explicit HazardOverflow(const HazardSegment& segment);
  const HazardSegment& segment() const noexcept { return segment_; }

 private:
  HazardSegment segment_;
};

/// Slopes below this magnitude use the midpoint rectangle exp(A + B t_mid) Δt.
inline constexpr double kFlatSlopeThreshold = 1e-8;

double log_hazard(const Covariates& covariates, double t, const ParameterDraw& draw, const SubjectEffects& effects,
                  const ModelSpec& spec);

/// Segments partitioning [0, upto] at every θ-knot and hazard-knot in (0, upto).
std::vector<HazardSegment> segmentize(const Covariates& covariates, double upto, const ParameterDraw& draw,
                                      const SubjectEffects& effects, const ModelSpec& spec);

/// Σ ∫ exp(A + B s) ds over the segments. Throws HazardOverflow.
double cumulative_hazard(const std::vector<HazardSegment>& segments);
double segment_integral(const HazardSegment& segment);

/// δ log h(t_i) - H(t_i).
double survival_loglik(const SubjectRecord& subject, const ParameterDraw& draw, const SubjectEffects& effects,
                       const ModelSpec& spec);

/// Per-subject evaluator over precomputed design rows. All survival
/// computations in the library go through this type.
class HazardModel {
 public:
  HazardModel(const ModelSpec& spec, const DesignRows& rows, const ParameterDraw& draw, const Eigen::VectorXd& u);

  double log_hazard(double t) const;
  /// Slope of log h on the open interval that starts at `t`.
  double log_hazard_slope(double t) const;
  std::vector<HazardSegment> segments(double from, double to) const;
  double cumulative(double from, double to) const;

  const LinearTrait& trait() const { return trait_; }

 private:
  const ModelSpec& spec_;
  const ParameterDraw& draw_;
  LinearTrait trait_;
  double static_part_ = 0.0;  // Wγ (+ ν'u for the random-effects form)
};

}  // namespace jointrait
