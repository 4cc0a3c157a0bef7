#include "jointrait/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jointrait {

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw std::invalid_argument("gelman_rubin needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 2) throw std::invalid_argument("gelman_rubin needs chains of length >= 2");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("gelman_rubin needs chains of equal length");

  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  std::vector<double> means(m);
  double grand = 0.0, w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (double x : chains[j]) s += x;
    means[j] = s / dn;
    grand += means[j];
    double ss = 0.0;
    for (double x : chains[j]) ss += (x - means[j]) * (x - means[j]);
    w += ss / (dn - 1.0);
  }
  grand /= dm;
  w /= dm;
  double b = 0.0;
  for (double mj : means) b += (mj - grand) * (mj - grand);
  b *= dn / (dm - 1.0);

  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double v = (dn - 1.0) / dn * w + (dm + 1.0) / (dm * dn) * b;
  return std::sqrt(v / w);
}

}  // namespace jointrait
