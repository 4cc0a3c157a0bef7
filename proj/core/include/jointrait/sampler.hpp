#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "jointrait/archive.hpp"
#include "jointrait/data.hpp"
#include "jointrait/model_spec.hpp"
#include "jointrait/priors.hpp"
#include "jointrait/stats.hpp"

namespace jointrait {

/// Progress callback: (chain, iteration).
using ProgressFn = std::function<void(int, int)>;

/// Metropolis-within-Gibbs fit. Each chain sweeps, in order:
///   1. per outcome: exact Gibbs for continuous (a_k, b_k, 1/σ²_εk),
///      five adaptive random-walk Metropolis steps for binary/ordinal blocks
///   2. β
///   3. ζ, then σ_ζ
///   4. survival block (γ, ν, η₀, η₁), then ξ, then σ_ξ
///   5. every u_i
///   6. a location shift of (β, u) that leaves every θ_i(t) unchanged
///   7. θ ↦ θ + δ and θ ↦ cθ moves absorbed by all non-anchor parameters
///   8. Σ
/// Proposal covariances adapt during burn-in only. Chains run on separate
/// threads with independent RNG streams; results do not depend on scheduling.
///
/// Throws ConfigError for an invalid spec or config (e.g. missing anchor).
/// Sufficient statistics of one continuous outcome given θ at its visits.
struct ContinuousStats {
  double n = 0.0, sy = 0.0, st = 0.0, stt = 0.0, sty = 0.0, syy = 0.0;
  void add(double theta, double y);
};

/// Full conditionals of y = a + bθ + ε, ε ~ N(0, var), under the priors:
/// a is normal, b a normal truncated to (0, loading_upper), var inverse-gamma.
/// The variance sampler returns `current` if the gamma draw degenerates.
double sample_continuous_intercept(Rng& rng, const ContinuousStats& s, double b, double var, const PriorSpec& priors);
double sample_continuous_loading(Rng& rng, const ContinuousStats& s, double a, double var, const PriorSpec& priors);
double sample_continuous_variance(Rng& rng, const ContinuousStats& s, double a, double b, double current,
                                  const PriorSpec& priors);

PosteriorArchive fit(const Dataset& data, const ModelSpec& spec, const PriorSpec& priors, const ChainConfig& config,
                     const ProgressFn& progress = {});

}  // namespace jointrait
