#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace jointrait {

using Rng = std::mt19937_64;

/// Engine seeded from (seed, stream...) through std::seed_seq.
Rng make_rng(std::uint64_t seed, std::uint64_t stream_a = 0, std::uint64_t stream_b = 0);

/// Type-7 (linear interpolation) sample quantile; sorts a copy.
double quantile(std::span<const double> values, double prob);
double mean(std::span<const double> values);

/// Normal(mean, sd) truncated to (lo, hi), by inverse CDF.
double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

}  // namespace jointrait
