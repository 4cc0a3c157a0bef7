#pragma once

namespace jointrait {

/// Vague priors. Locations (β, γ, ν, η₀, η₁, continuous/binary a_k and the
/// first threshold of non-anchor ordinal outcomes) are N(0, location_variance);
/// non-anchor loadings are Uniform(0, loading_upper); threshold increments are
/// half-normal with variance increment_variance; correlations are
/// Uniform[-1, 1]; every variance is Inverse-Gamma(ig_shape, ig_scale).
struct PriorSpec {
  double location_variance = 100.0;
  double loading_upper = 10.0;
  double increment_variance = 100.0;
  double ig_shape = 0.01;
  double ig_scale = 0.01;

  void validate() const;

  double log_location(double x) const;
  double log_loading(double b) const;
  double log_increment(double delta) const;
  double log_correlation(double rho) const;
  double log_variance(double v) const;
};

}  // namespace jointrait
