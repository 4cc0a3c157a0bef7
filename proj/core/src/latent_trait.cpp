#include "jointrait/latent_trait.hpp"

#include <algorithm>

#include "jointrait/error.hpp"

namespace jointrait {

std::vector<double> spline_basis(double t, const std::vector<double>& knots) {
  for (std::size_t r = 1; r < knots.size(); ++r)
    if (!(knots[r] > knots[r - 1])) throw ConfigError("spline knots must be strictly increasing");
  std::vector<double> out(knots.size());
  for (std::size_t r = 0; r < knots.size(); ++r) out[r] = std::max(t - knots[r], 0.0);
  return out;
}

namespace {

double column_value(const Term& term, const Covariates& covariates, const std::string& prefix) {
  if (term.covariate.empty()) return 1.0;
  auto it = covariates.find(term.covariate);
  if (it == covariates.end()) throw DataError(prefix + "." + term.covariate, "missing covariate referenced by the design");
  return it->second;
}

void split_terms(const std::vector<Term>& terms, const Covariates& covariates, const std::string& prefix,
                 Eigen::VectorXd& constant, Eigen::VectorXd& slope) {
  const auto n = static_cast<Eigen::Index>(terms.size());
  constant = Eigen::VectorXd::Zero(n);
  slope = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = column_value(terms[j], covariates, prefix);
    (terms[j].times_time ? slope : constant)(j) = v;
  }
}

}  // namespace

DesignRows DesignRows::build(const Covariates& covariates, const DesignSpec& design, const std::string& field_prefix) {
  DesignRows rows;
  split_terms(design.fixed, covariates, field_prefix, rows.x_const, rows.x_slope);
  split_terms(design.random, covariates, field_prefix, rows.z_const, rows.z_slope);
  rows.w.resize(static_cast<Eigen::Index>(design.survival.size()));
  for (std::size_t j = 0; j < design.survival.size(); ++j)
    rows.w(static_cast<Eigen::Index>(j)) = column_value(design.survival[j], covariates, field_prefix);
  return rows;
}

LinearTrait LinearTrait::from(const DesignRows& rows, std::span<const double> beta, const Eigen::VectorXd& u) {
  LinearTrait lt;
  for (Eigen::Index j = 0; j < rows.x_const.size(); ++j) {
    lt.intercept += rows.x_const(j) * beta[j];
    lt.slope += rows.x_slope(j) * beta[j];
  }
  for (Eigen::Index j = 0; j < rows.z_const.size(); ++j) {
    lt.intercept += rows.z_const(j) * u(j);
    lt.slope += rows.z_slope(j) * u(j);
  }
  return lt;
}

double LinearTrait::at(double t, std::span<const double> zeta, std::span<const double> knots) const {
  double v = intercept + slope * t;
  for (std::size_t r = 0; r < knots.size(); ++r)
    if (t > knots[r]) v += zeta[r] * (t - knots[r]);
  return v;
}

double LinearTrait::derivative_at(double t, std::span<const double> zeta, std::span<const double> knots) const {
  double v = slope;
  for (std::size_t r = 0; r < knots.size(); ++r)
    if (t > knots[r]) v += zeta[r];
  return v;
}

LatentState latent_trait(const Covariates& covariates, double t, const ParameterDraw& draw,
                         const SubjectEffects& effects, const DesignSpec& design) {
  const auto rows = DesignRows::build(covariates, design);
  const auto lt = LinearTrait::from(rows, draw.beta, effects.u);
  const auto basis = spline_basis(t, design.theta_knots);
  LatentState s;
  s.theta = lt.intercept + lt.slope * t;
  s.theta_prime = lt.slope;
  for (std::size_t r = 0; r < basis.size(); ++r) {
    s.theta += draw.zeta[r] * basis[r];
    if (t > design.theta_knots[r]) s.theta_prime += draw.zeta[r];
  }
  return s;
}

}  // namespace jointrait
