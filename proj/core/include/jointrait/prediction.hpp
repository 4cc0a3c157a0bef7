#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointrait/archive.hpp"
#include "jointrait/data.hpp"
#include "jointrait/evaluation.hpp"

namespace jointrait {

/// A new subject's history up to the landmark, with no event by then.
struct PredictionRequest {
  std::string id = "new";
  Covariates covariates;
  std::vector<Visit> visits;
  double landmark = 0.0;
  std::vector<double> horizons;
  int m_use = 0;  // 0 = every archive draw
  int mh_iterations = 50;
  std::uint64_t seed = 1;
};

/// Throws DataError naming the offending field. Risk horizons must be at or
/// after the landmark; `past_horizons` lets trajectory horizons fall before
/// it (retrodiction).
void validate_request(const PredictionRequest& request, const ModelSpec& spec, bool past_horizons = false);

/// Indices of the archive draws a request uses: all of them, or `m_use`
/// evenly spaced ones.
std::vector<int> selected_draws(int n_draws, int m_use);

/// One random-effects draw per selected archive draw m: a random-walk
/// Metropolis chain of `mh_iterations` steps started at u = 0 with proposal
/// covariance (2.38²/q) Σ⁽ᵐ⁾, targeting p(y | u) S(landmark | u) N(u; 0, Σ⁽ᵐ⁾);
/// the final state is kept. The stream for draw m is seeded by (seed, m).
std::vector<Eigen::VectorXd> sample_subject_effects(const PredictionRequest& request, const PosteriorArchive& archive);

/// Percentile summary over draws (type-7 interpolation).
struct Band {
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};

struct TrajectoryPoint {
  double horizon = 0.0;
  bool retrodiction = false;  // horizon before the last observed visit
  Band value;                 // continuous: y; binary: P(y=1); ordinal: E[y]
  std::vector<Band> category_probs;  // ordinal only
};

struct OutcomeTrajectory {
  std::string outcome;
  OutcomeKind kind = OutcomeKind::continuous;
  std::vector<TrajectoryPoint> points;
};

struct TrajectoryBand {
  std::vector<OutcomeTrajectory> outcomes;
};

struct RiskPoint {
  double horizon = 0.0;
  Band risk;
};

struct RiskCurve {
  std::vector<RiskPoint> points;
  int used_draws = 0;
  int skipped_draws = 0;
  double skipped_fraction = 0.0;
  bool warning = false;  // more than 1% of draws skipped
};

/// `effects` must align with selected_draws(archive.n_draws(), request.m_use).
TrajectoryBand predict_trajectory(const PredictionRequest& request, const PosteriorArchive& archive,
                                  const std::vector<Eigen::VectorXd>& effects);

/// π(t'|t) = mean over draws of 1 - exp(-∫_t^{t'} h). Draws whose hazard
/// overflows are skipped and counted.
RiskCurve predict_risk(const PredictionRequest& request, const PosteriorArchive& archive,
                       const std::vector<Eigen::VectorXd>& effects);

/// π̂_i(horizon | landmark) for every subject with t_i > landmark, from the
/// visits at or before the landmark. Subject i uses its own seed derived
/// from (seed, i). The records carry the observed (t_i, δ_i) for evaluation.
std::vector<EvalRecord> landmark_predictions(const PosteriorArchive& archive, const Dataset& data, double landmark,
                                             double horizon, std::uint64_t seed, int m_use = 0,
                                             int mh_iterations = 50);

}  // namespace jointrait
