#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "jointrait/data.hpp"
#include "jointrait/model_spec.hpp"
#include "jointrait/parameters.hpp"

namespace jointrait {

/// Truncated power basis: component r is max(t - κ_r, 0).
/// Throws ConfigError when knots are not strictly increasing.
std::vector<double> spline_basis(double t, const std::vector<double>& knots);

/// θ(t) and θ'(t) for one subject. Throws DataError naming a covariate the
/// design references but the subject lacks.
LatentState latent_trait(const Covariates& covariates, double t, const ParameterDraw& draw,
                         const SubjectEffects& effects, const DesignSpec& design);

/// Design columns split as X(t) = x_const + t * x_slope (likewise Z) for one
/// subject, plus the survival covariates W.
struct DesignRows {
  Eigen::VectorXd x_const, x_slope;
  Eigen::VectorXd z_const, z_slope;
  Eigen::VectorXd w;

  static DesignRows build(const Covariates& covariates, const DesignSpec& design,
                          const std::string& field_prefix = "covariates");
};

/// θ(t) = θ₀ + θ₁ t + Σ ζ_r (t-κ_r)₊ where θ₀, θ₁ fold β and u together.
struct LinearTrait {
  double intercept = 0.0;
  double slope = 0.0;

  static LinearTrait from(const DesignRows& rows, std::span<const double> beta, const Eigen::VectorXd& u);
  double at(double t, std::span<const double> zeta, std::span<const double> knots) const;
  double derivative_at(double t, std::span<const double> zeta, std::span<const double> knots) const;
};

}  // namespace jointrait
