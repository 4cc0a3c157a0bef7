#include "jointrait/survival.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jointrait/error.hpp"

namespace jointrait {

namespace {

std::string describe(const HazardSegment& s) {
  std::ostringstream os;
  os << "cumulative hazard overflow on segment [" << s.t_lo << ", " << s.t_hi << "] with log h = " << s.intercept
     << " + " << s.slope << " s";
  return os.str();
}

}  // namespace

HazardOverflow::HazardOverflow(const HazardSegment& segment)
    : std::runtime_error(describe(segment)), segment_(segment) {}

HazardModel::HazardModel(const ModelSpec& spec, const DesignRows& rows, const ParameterDraw& draw,
                         const Eigen::VectorXd& u)
    : spec_(spec), draw_(draw), trait_(LinearTrait::from(rows, draw.beta, u)) {
  if (static_cast<int>(draw.assoc.size()) != spec.assoc_dim())
    throw ConfigError("association has " + std::to_string(draw.assoc.size()) + " coefficients but form " +
                      to_string(spec.association) + " needs " + std::to_string(spec.assoc_dim()));
  if (draw.xi.size() != spec.design.effective_hazard_knots().size() || draw.zeta.size() != spec.design.theta_knots.size())
    throw ConfigError("spline coefficient count does not match the knots");
  static_part_ = draw.eta0;
  for (Eigen::Index j = 0; j < rows.w.size(); ++j) static_part_ += rows.w(j) * draw.gamma[j];
  if (spec.association == AssociationForm::random_effects)
    for (Eigen::Index j = 0; j < u.size(); ++j) static_part_ += draw.assoc[j] * u(j);
}

double HazardModel::log_hazard(double t) const {
  const auto& knots = spec_.design.theta_knots;
  const auto& hknots = spec_.design.effective_hazard_knots();
  double v = static_part_;
  if (spec_.design.baseline_slope) v += draw_.eta1 * t;
  for (std::size_t r = 0; r < hknots.size(); ++r)
    if (t > hknots[r]) v += draw_.xi[r] * (t - hknots[r]);
  switch (spec_.association) {
    case AssociationForm::shared_latent: v += draw_.assoc[0] * trait_.at(t, draw_.zeta, knots); break;
    case AssociationForm::latent_and_slope:
      v += draw_.assoc[0] * trait_.at(t, draw_.zeta, knots) + draw_.assoc[1] * trait_.derivative_at(t, draw_.zeta, knots);
      break;
    case AssociationForm::random_effects: break;
  }
  return v;
}

double HazardModel::log_hazard_slope(double t) const {
  const auto& knots = spec_.design.theta_knots;
  const auto& hknots = spec_.design.effective_hazard_knots();
  double b = spec_.design.baseline_slope ? draw_.eta1 : 0.0;
  for (std::size_t r = 0; r < hknots.size(); ++r)
    if (t >= hknots[r]) b += draw_.xi[r];
  if (spec_.association != AssociationForm::random_effects) {
    double theta_slope = trait_.slope;
    for (std::size_t r = 0; r < knots.size(); ++r)
      if (t >= knots[r]) theta_slope += draw_.zeta[r];
    b += draw_.assoc[0] * theta_slope;
  }
  return b;
}

std::vector<HazardSegment> HazardModel::segments(double from, double to) const {
  std::vector<double> cuts{from};
  for (const auto* knots : {&spec_.design.theta_knots, &spec_.design.effective_hazard_knots()})
    for (double k : *knots)
      if (k > from && k < to) cuts.push_back(k);
  cuts.push_back(to);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<HazardSegment> out;
  out.reserve(cuts.size() - 1);
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double lo = cuts[s], hi = cuts[s + 1];
    HazardSegment seg;
    seg.t_lo = lo;
    seg.t_hi = hi;
    seg.slope = log_hazard_slope(lo);
    // Evaluate at the midpoint so θ' takes its open-interval value.
    const double mid = 0.5 * (lo + hi);
    seg.intercept = log_hazard(mid) - seg.slope * mid;
    out.push_back(seg);
  }
  return out;
}

double HazardModel::cumulative(double from, double to) const {
  if (!(to > from)) return 0.0;
  return cumulative_hazard(segments(from, to));
}

double segment_integral(const HazardSegment& s) {
  const double width = s.t_hi - s.t_lo;
  double v;
  if (std::abs(s.slope) < kFlatSlopeThreshold) {
    v = std::exp(s.intercept + s.slope * 0.5 * (s.t_lo + s.t_hi)) * width;
  } else {
    v = std::exp(s.intercept + s.slope * s.t_lo) * (std::expm1(s.slope * width) / s.slope);
  }
  if (!std::isfinite(v)) throw HazardOverflow(s);
  return v;
}

double cumulative_hazard(const std::vector<HazardSegment>& segments) {
  double total = 0.0;
  for (const auto& s : segments) total += segment_integral(s);
  if (!std::isfinite(total)) throw HazardOverflow(segments.back());
  return total;
}

double log_hazard(const Covariates& covariates, double t, const ParameterDraw& draw, const SubjectEffects& effects,
                  const ModelSpec& spec) {
  const auto rows = DesignRows::build(covariates, spec.design);
  return HazardModel(spec, rows, draw, effects.u).log_hazard(t);
}

std::vector<HazardSegment> segmentize(const Covariates& covariates, double upto, const ParameterDraw& draw,
                                      const SubjectEffects& effects, const ModelSpec& spec) {
  const auto rows = DesignRows::build(covariates, spec.design);
  return HazardModel(spec, rows, draw, effects.u).segments(0.0, upto);
}

double survival_loglik(const SubjectRecord& subject, const ParameterDraw& draw, const SubjectEffects& effects,
                       const ModelSpec& spec) {
  const auto rows = DesignRows::build(subject.covariates, spec.design);
  const HazardModel model(spec, rows, draw, effects.u);
  double v = -model.cumulative(0.0, subject.observed_time);
  if (subject.event) v += model.log_hazard(subject.observed_time);
  return v;
}

}  // namespace jointrait
