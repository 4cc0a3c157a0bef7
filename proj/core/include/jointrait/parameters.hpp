#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointrait/model_spec.hpp"

namespace jointrait {

/// One posterior sample of every model parameter.
///
/// Σ is stored as standard deviations `re_sd` (σ₁..σ_q) plus correlations
/// `re_corr` in row-major upper-triangle order (ρ₁₂, ρ₁₃, .., ρ₂₃, ..).
/// `sigma_eps` is indexed by outcome and only meaningful for continuous ones.
struct ParameterDraw {
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  std::vector<double> sigma_eps;
  std::vector<double> beta;
  std::vector<double> re_sd;
  std::vector<double> re_corr;
  std::vector<double> zeta;
  double sigma_zeta = 1.0;
  std::vector<double> gamma;
  std::vector<double> assoc;
  double eta0 = 0.0;
  double eta1 = 0.0;
  std::vector<double> xi;
  double sigma_xi = 1.0;

  Eigen::MatrixXd covariance() const;

  /// A draw with every dimension sized for `spec`: locations 0, loadings 1,
  /// scales 1, thresholds 0,1,2,.. and anchors set.
  static ParameterDraw zeros(const ModelSpec& spec);

  bool operator==(const ParameterDraw&) const = default;
};

struct SubjectEffects {
  Eigen::VectorXd u;
};

struct LatentState {
  double theta = 0.0;
  double theta_prime = 0.0;
};

/// Index of ρ_jk (j < k) inside ParameterDraw::re_corr.
int corr_index(int j, int k, int q);

/// Dimension check; throws ConfigError.
void check_dimensions(const ParameterDraw& draw, const ModelSpec& spec);

/// Empty string when every ParameterDraw invariant holds, otherwise a
/// description of the first violation.
std::string invariant_violation(const ParameterDraw& draw, const ModelSpec& spec);

}  // namespace jointrait
