#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "jointrait/data.hpp"
#include "jointrait/model_spec.hpp"
#include "jointrait/parameters.hpp"

namespace jointrait {

/// Data-generating scenario: one continuous and two 7-category ordinal
/// outcomes driven by θ = β₀ + β₁x₁ + β₂t + β₃x₁t + u₀ + u₁t, and the hazard
/// h₀ exp(γ x₂ + ν θ(t)) with x₁ ~ Bernoulli(0.5) and x₂ uniform on 30..80.
struct SimScenario {
  int n = 800;
  std::vector<double> visit_grid{0, 3, 6, 12, 18, 24};
  ParameterDraw truth;
  double censor_lo = 10.0;
  double censor_hi = 24.0;
  double admin_cap = 24.0;
  std::uint64_t seed = 1;
  std::vector<double> truth_landmarks{0, 3, 6};
  std::vector<double> truth_horizons{9, 12, 15, 18};

  /// Default truths: β=(-1,-0.2,0.8,-0.2), γ=-0.12, ν=0.75, h₀=0.1,
  /// a₁=15, b₁=7, σ_ε=5, a₂=(0,1,2,4,5,6), a₃=(-1,1,3,4,6,8), b₂=1, b₃=1.2,
  /// σ₁=1.5, σ₂=0.15, ρ=0.4.
  static SimScenario standard();
  /// Model fitted to scenario data (constant baseline hazard, no splines).
  static ModelSpec model_spec();

  void validate() const;
};

struct RiskTruth {
  double landmark = 0.0;
  double horizon = 0.0;
  double risk = 0.0;  // closed-form π(t'|t) given the true u; NaN if t_i ≤ t
};

struct SubjectTruth {
  std::string id;
  Eigen::VectorXd u;
  double event_time = 0.0;  // may be +∞
  double censor_time = 0.0;
  std::vector<RiskTruth> risks;
};

struct SimulatedData {
  Dataset data;
  std::vector<SubjectTruth> truth;
  nlohmann::json truth_json(const SimScenario& scenario) const;
};

/// Event time for the hazard exp(c + slope t) given E ~ Exp(1): solves
/// H(T) = E. Returns +∞ when the total hazard is finite and below E.
double inverse_survival_sample(double c, double slope, double e);

SimulatedData generate_dataset(const SimScenario& scenario);

}  // namespace jointrait
