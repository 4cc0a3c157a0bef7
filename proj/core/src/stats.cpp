#include "jointrait/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace jointrait {

Rng make_rng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_a), static_cast<std::uint32_t>(stream_a >> 32),
                    static_cast<std::uint32_t>(stream_b), static_cast<std::uint32_t>(stream_b >> 32)};
  return Rng(seq);
}

double quantile(std::span<const double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_truncated_normal(Rng& rng, double mu, double sd, double lo, double hi) {
  const boost::math::normal_distribution<double> n01;
  const double a = (lo - mu) / sd, b = (hi - mu) / sd;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double w = unif(rng);
  double z;
  // Work in the tail that keeps the CDF values away from 1.
  if (a > 0.0) {
    const double qa = cdf(complement(n01, a)), qb = std::isfinite(b) ? cdf(complement(n01, b)) : 0.0;
    const double q = qa - w * (qa - qb);
    z = q <= 0.0 ? a : boost::math::quantile(complement(n01, q));
  } else {
    const double pa = std::isfinite(a) ? cdf(n01, a) : 0.0, pb = std::isfinite(b) ? cdf(n01, b) : 1.0;
    const double p = pa + w * (pb - pa);
    z = p <= 0.0 ? a : (p >= 1.0 ? b : boost::math::quantile(n01, p));
  }
  return std::clamp(mu + sd * z, lo, hi);
}

}  // namespace jointrait
