#include "jointrait/priors.hpp"

#include <cmath>
#include <limits>

#include "jointrait/error.hpp"

namespace jointrait {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void PriorSpec::validate() const {
  for (double v : {location_variance, loading_upper, increment_variance, ig_shape, ig_scale})
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("prior scales must be positive and finite");
}

double PriorSpec::log_location(double x) const {
  return -0.5 * (kLog2Pi + std::log(location_variance)) - 0.5 * x * x / location_variance;
}

double PriorSpec::log_loading(double b) const {
  if (!(b > 0.0 && b < loading_upper)) return kNegInf;
  return -std::log(loading_upper);
}

double PriorSpec::log_increment(double delta) const {
  if (!(delta > 0.0)) return kNegInf;
  return std::log(2.0) - 0.5 * (kLog2Pi + std::log(increment_variance)) - 0.5 * delta * delta / increment_variance;
}

double PriorSpec::log_correlation(double rho) const {
  if (!(rho >= -1.0 && rho <= 1.0)) return kNegInf;
  return -std::log(2.0);
}

double PriorSpec::log_variance(double v) const {
  if (!(v > 0.0)) return kNegInf;
  return ig_shape * std::log(ig_scale) - std::lgamma(ig_shape) - (ig_shape + 1.0) * std::log(v) - ig_scale / v;
}

}  // namespace jointrait
