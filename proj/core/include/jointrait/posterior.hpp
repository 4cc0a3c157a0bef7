#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointrait/model_spec.hpp"
#include "jointrait/parameters.hpp"
#include "jointrait/prepared.hpp"
#include "jointrait/priors.hpp"

namespace jointrait {

/// Maps a ParameterDraw to and from the unconstrained coordinates the sampler
/// moves in: log-variances, log-loadings, log threshold increments and
/// atanh-correlations. Anchor constraints, and the association when
/// `fix_association` is set, are not free coordinates.
class ParameterCodec {
 public:
  explicit ParameterCodec(const ModelSpec& spec, bool fix_association = false);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  Eigen::VectorXd encode(const ParameterDraw& draw) const;
  /// Overwrites the free parameters of `draw` from `x`; fixed values stay.
  void decode_into(const Eigen::VectorXd& x, ParameterDraw& draw) const;
  /// log |∂ constrained / ∂ unconstrained|.
  double log_jacobian(const ParameterDraw& draw) const;
  /// Chain rule: turns a gradient on the constrained scale (laid out as
  /// ConstrainedGradient) into one on the unconstrained scale, Jacobian
  /// terms included.
  struct ConstrainedGradient;
  Eigen::VectorXd to_unconstrained_gradient(const ConstrainedGradient& g, const ParameterDraw& draw) const;

  struct OutcomeSlots {
    int offset = 0;
    int size = 0;
  };
  const std::vector<OutcomeSlots>& outcome_slots() const { return outcome_slots_; }
  int beta_offset() const { return beta_; }
  int zeta_offset() const { return zeta_; }
  int log_var_zeta_index() const { return log_var_zeta_; }
  int gamma_offset() const { return gamma_; }
  int assoc_offset() const { return assoc_; }  // -1 when fixed
  int eta0_index() const { return eta0_; }
  int eta1_index() const { return eta1_; }  // -1 without a baseline slope
  int xi_offset() const { return xi_; }
  int log_var_xi_index() const { return log_var_xi_; }
  int re_log_var_offset() const { return re_log_var_; }
  int re_atanh_offset() const { return re_atanh_; }

  bool fix_association() const { return fix_association_; }
  const ModelSpec& spec() const { return spec_; }

  /// Constrained scalar columns used for archives and R̂: free thresholds,
  /// loadings, σ_ε, β, σ_j, ρ_jk, ζ, σ_ζ, γ, ν, η₀, η₁, ξ, σ_ξ.
  const std::vector<std::string>& column_names() const { return columns_; }
  std::vector<double> flatten(const ParameterDraw& draw) const;
  ParameterDraw unflatten(std::span<const double> values) const;

 private:
  ModelSpec spec_;
  bool fix_association_;
  std::vector<std::string> names_;
  std::vector<std::string> columns_;
  std::vector<OutcomeSlots> outcome_slots_;
  int beta_ = 0, zeta_ = 0, log_var_zeta_ = -1, gamma_ = 0, assoc_ = -1, eta0_ = 0, eta1_ = -1, xi_ = 0,
      log_var_xi_ = -1, re_log_var_ = 0, re_atanh_ = 0;
};

/// Gradient on the natural (constrained) scale, same shapes as ParameterDraw.
/// Variance-type entries are derivatives with respect to the variance.
struct ParameterCodec::ConstrainedGradient {
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  std::vector<double> var_eps;
  Eigen::VectorXd beta;
  Eigen::MatrixXd sigma;  // ∂/∂Σ treating entries as independent
  Eigen::VectorXd zeta;
  double var_zeta = 0.0;
  Eigen::VectorXd gamma;
  Eigen::VectorXd assoc;
  double eta0 = 0.0;
  double eta1 = 0.0;
  Eigen::VectorXd xi;
  double var_xi = 0.0;

  static ConstrainedGradient zeros(const ModelSpec& spec);
};

/// Penalized joint log posterior on the constrained scale:
///   Σ_i [l_y + l_s] - ζ'ζ/σ_ζ² - R log σ_ζ - ξ'ξ/σ_ξ² - R_h log σ_ξ
///   + Σ_i log N(u_i; 0, Σ) + log priors.
/// Returns -∞ outside the support (Σ not PD, b_k ≥ upper bound, overflow).
double log_posterior(const PreparedData& data, const ParameterDraw& draw, const std::vector<Eigen::VectorXd>& effects,
                     const PriorSpec& priors);

/// log_posterior + log Jacobian at unconstrained coordinates
/// x = (codec coordinates, u_1, .., u_n); `base` supplies fixed values.
double log_posterior_unconstrained(const PreparedData& data, const ParameterCodec& codec, const ParameterDraw& base,
                                   const Eigen::VectorXd& x, const PriorSpec& priors);

/// Gradient of log_posterior_unconstrained with respect to x.
Eigen::VectorXd grad_log_posterior(const PreparedData& data, const ParameterCodec& codec, const ParameterDraw& draw,
                                   const std::vector<Eigen::VectorXd>& effects, const PriorSpec& priors);

/// Stacks codec coordinates and effects into the vector x used above.
Eigen::VectorXd stack_unconstrained(const ParameterCodec& codec, const ParameterDraw& draw,
                                    const std::vector<Eigen::VectorXd>& effects);

/// Σ_j Σ_k log p(y_ijk | θ_i(t_ij)) for one prepared subject.
double subject_longitudinal_loglik(const ModelSpec& spec, const PreparedSubject& subject, const ParameterDraw& draw,
                                   const Eigen::VectorXd& u);
/// δ_i log h_i(t_i) - H_i(t_i). Throws HazardOverflow.
double subject_survival_loglik(const ModelSpec& spec, const PreparedSubject& subject, const ParameterDraw& draw,
                               const Eigen::VectorXd& u);
/// -ζ'ζ/σ_ζ² - R log σ_ζ - ξ'ξ/σ_ξ² - R_h log σ_ξ.
double spline_penalty(const ModelSpec& spec, const ParameterDraw& draw);
/// Sum of log prior densities of every free parameter except Σ's implied
/// random-effects density. -∞ outside the support.
double log_prior(const ModelSpec& spec, const ParameterDraw& draw, const PriorSpec& priors);

/// log N(u; 0, Σ) for every subject, from the Cholesky factor of Σ.
double random_effects_log_density(const Eigen::MatrixXd& sigma, const std::vector<Eigen::VectorXd>& effects);

}  // namespace jointrait
