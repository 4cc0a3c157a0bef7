#pragma once

#include <functional>
#include <string>
#include <vector>

#include <jointrait/jointrait.hpp>

namespace jointrait::fixtures {

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Adaptive Gauss-Kronrod integral of exp(log_h) over [lo, hi], split at
/// `breaks`. Independent of the closed-form segment integrals.
double quadrature_cumulative(const std::function<double(double)>& log_h, double lo, double hi,
                             std::vector<double> breaks = {});

/// Scenario spec with every dimension filled in, ν on the shared-trait form.
ModelSpec scenario_spec(AssociationForm form = AssociationForm::shared_latent);

/// Archive holding `draws` (no training subjects) with its id set.
PosteriorArchive make_archive(const ModelSpec& spec, std::vector<ParameterDraw> draws);

/// Scenario truth with ν = 0 and γ = 0, so h(t) = 0.1 for everybody.
ParameterDraw constant_hazard_truth();

/// Random parameter draw satisfying every invariant of `spec`, with
/// moderate magnitudes so hazards stay finite.
ParameterDraw random_draw(const ModelSpec& spec, Rng& rng);

/// Dataset drawn from `draw` under `spec`: visits every 3 months up to the
/// observed time, outcomes from the measurement model, covariates x1 in {0,1}
/// and x2 in [0, 1), random censoring in (1, 24). `effects` receives the u_i.
Dataset random_dataset(const ModelSpec& spec, const ParameterDraw& draw, int n, Rng& rng,
                       std::vector<Eigen::VectorXd>* effects = nullptr);

/// Spec with θ knots, hazard knots, a baseline slope and a binary outcome,
/// so every parameter block is active.
ModelSpec rich_spec(AssociationForm form);

/// Largest |analytic - central difference| / max(1, |central difference|)
/// over every coordinate of the unconstrained gradient, on a random
/// 5-subject instance of `rich_spec` (association form cycles with `seed`).
double gradient_max_relative_error(std::uint64_t seed);

/// Smallest KS p-value over the coordinates of u when 2000 effects sampled
/// for an empty history at landmark 0 are compared with 2000 direct draws
/// from N(0, Σ) at the scenario truth.
double prior_recovery_min_pvalue(std::uint64_t seed);

/// Random uncensored fixture of `n` records (landmark 2, horizon 10) with at
/// least one case and one control inside the at-risk set.
std::vector<EvalRecord> uncensored_fixture(int n, std::uint64_t seed);

/// Exhaustive case/control concordance among records with t > landmark,
/// cases t <= horizon, ties counted one half.
double brute_force_concordance(const std::vector<EvalRecord>& records, double landmark, double horizon);

/// Six records with mixed censoring; BS(2, 8) is 0.064 under the censoring
/// KM and 0.08875 under the event KM (worked by hand in the unit tests).
std::vector<EvalRecord> brier_fixture();

/// Temporary directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

std::string read_file(const std::string& path);

}  // namespace jointrait::fixtures
