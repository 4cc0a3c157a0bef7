#include "jointrait/simulation.hpp"

#include <cmath>
#include <limits>

#include "jointrait/error.hpp"
#include "jointrait/longitudinal.hpp"
#include "jointrait/posterior.hpp"
#include "jointrait/stats.hpp"
#include "jointrait/survival.hpp"

namespace jointrait {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

// First time the cumulative hazard reaches e, extending the last segment
// past `segments.back().t_hi`.
double invert_cumulative(const std::vector<HazardSegment>& segments, double e) {
  double remaining = e;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    const double c = seg.intercept + seg.slope * seg.t_lo;
    const double dt = inverse_survival_sample(c, seg.slope, remaining);
    const bool last = s + 1 == segments.size();
    if (last || dt <= seg.t_hi - seg.t_lo) return seg.t_lo + dt;
    remaining -= segment_integral(seg);
  }
  return kInf;
}

}  // namespace

double inverse_survival_sample(double c, double slope, double e) {
  if (std::abs(slope) < kFlatSlopeThreshold) return e * std::exp(-c);
  const double arg = slope * e * std::exp(-c);
  if (arg <= -1.0) return kInf;  // total hazard e^c / -slope is below e
  return std::log1p(arg) / slope;
}

SimScenario SimScenario::standard() {
  SimScenario s;
  const auto spec = model_spec();
  ParameterDraw t = ParameterDraw::zeros(spec);
  t.a = {{15.0}, {0, 1, 2, 4, 5, 6}, {-1, 1, 3, 4, 6, 8}};
  t.b = {7.0, 1.0, 1.2};
  t.sigma_eps = {5.0, 1.0, 1.0};
  t.beta = {-1.0, -0.2, 0.8, -0.2};
  t.re_sd = {1.5, 0.15};
  t.re_corr = {0.4};
  t.gamma = {-0.12};
  t.assoc = {0.75};
  t.eta0 = std::log(0.1);
  t.eta1 = 0.0;
  s.truth = t;
  return s;
}

ModelSpec SimScenario::model_spec() {
  ModelSpec spec;
  spec.outcomes = {{"y1", OutcomeKind::continuous, 0, false},
                   {"y2", OutcomeKind::ordinal, 7, true},
                   {"y3", OutcomeKind::ordinal, 7, false}};
  spec.design.fixed = {Term::parse("1"), Term::parse("x1"), Term::parse("time"), Term::parse("x1:time")};
  spec.design.random = {Term::parse("1"), Term::parse("time")};
  spec.design.survival = {Term::parse("x2")};
  spec.design.baseline_slope = false;
  spec.association = AssociationForm::shared_latent;
  return spec;
}

void SimScenario::validate() const {
  if (n < 1) throw ConfigError("scenario needs at least one subject");
  validate_knots(visit_grid, "visit grid");
  if (!(censor_lo >= 0.0 && censor_lo <= censor_hi)) throw ConfigError("censoring bounds must satisfy 0 <= lo <= hi");
  if (!(admin_cap > 0.0)) throw ConfigError("administrative cap must be positive");
  const auto spec = model_spec();
  check_dimensions(truth, spec);
  for (int k = 0; k < spec.n_outcomes(); ++k)
    if (spec.outcomes[k].kind == OutcomeKind::continuous && truth.sigma_eps[k] < 0.0)
      throw ConfigError("residual scale must be nonnegative");
  for (double s : truth.re_sd)
    if (s < 0.0) throw ConfigError("random-effect scales must be nonnegative");
  for (double r : truth.re_corr)
    if (!(r > -1.0 && r < 1.0)) throw ConfigError("correlations must lie in (-1, 1)");
}

SimulatedData generate_dataset(const SimScenario& scenario) {
  scenario.validate();
  const auto spec = SimScenario::model_spec();
  const auto& truth = scenario.truth;
  const int q = spec.design.q();

  // u = diag(σ) chol(R) z, which stays defined when a scale is zero.
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(q, q);
  for (int j = 0; j < q; ++j)
    for (int k = j + 1; k < q; ++k) corr(j, k) = corr(k, j) = truth.re_corr[corr_index(j, k, q)];
  const Eigen::MatrixXd corr_chol = Eigen::LLT<Eigen::MatrixXd>(corr).matrixL();

  SimulatedData out;
  out.data.subjects.reserve(scenario.n);
  for (int i = 0; i < scenario.n; ++i) {
    Rng rng = make_rng(scenario.seed, static_cast<std::uint64_t>(i) + 1);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> age(30, 80);
    std::normal_distribution<double> n01;
    std::exponential_distribution<double> exp1(1.0);
    std::uniform_real_distribution<double> censor(scenario.censor_lo, scenario.censor_hi);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SubjectRecord s;
    s.id = std::to_string(i + 1);
    s.covariates["x1"] = coin(rng) ? 1.0 : 0.0;
    s.covariates["x2"] = age(rng);
    Eigen::VectorXd z(q);
    for (int j = 0; j < q; ++j) z(j) = n01(rng);
    Eigen::VectorXd u = corr_chol * z;
    for (int j = 0; j < q; ++j) u(j) *= truth.re_sd[j];

    const auto rows = DesignRows::build(s.covariates, spec.design);
    const HazardModel model(spec, rows, truth, u);
    const double e = exp1(rng);
    const double event_time = invert_cumulative(model.segments(0.0, scenario.admin_cap), e);
    const double censor_time = censor(rng);
    const double end = std::min(censor_time, scenario.admin_cap);
    s.observed_time = std::min(event_time, end);
    s.event = event_time <= end ? 1 : 0;

    const auto& trait = model.trait();
    for (double t : scenario.visit_grid) {
      if (t > s.observed_time) break;
      const double theta = trait.at(t, truth.zeta, spec.design.theta_knots);
      Visit v;
      v.time = t;
      for (int k = 0; k < spec.n_outcomes(); ++k) {
        const auto dist = outcome_distribution(spec, k, theta, truth);
        switch (dist.kind) {
          case OutcomeKind::continuous: v.values.push_back(dist.mean + dist.sd * n01(rng)); break;
          case OutcomeKind::binary: v.values.push_back(unif(rng) < dist.p_one ? 1.0 : 0.0); break;
          case OutcomeKind::ordinal: {
            const double w = unif(rng);
            double acc = 0.0;
            int l = 0;
            const int n = static_cast<int>(dist.category_probs.size());
            while (l < n - 1 && w >= acc + dist.category_probs[l]) acc += dist.category_probs[l++];
            v.values.push_back(static_cast<double>(l + 1));
            break;
          }
        }
      }
      s.visits.push_back(std::move(v));
    }

    SubjectTruth st;
    st.id = s.id;
    st.u = u;
    st.event_time = event_time;
    st.censor_time = censor_time;
    for (double t : scenario.truth_landmarks)
      for (double h : scenario.truth_horizons) {
        RiskTruth r{t, h, std::numeric_limits<double>::quiet_NaN()};
        if (s.observed_time > t && h >= t) r.risk = -std::expm1(-model.cumulative(t, h));
        st.risks.push_back(r);
      }
    out.data.subjects.push_back(std::move(s));
    out.truth.push_back(std::move(st));
  }
  return out;
}

nlohmann::json SimulatedData::truth_json(const SimScenario& scenario) const {
  const auto spec = SimScenario::model_spec();
  const ParameterCodec codec(spec);
  nlohmann::json params;
  const auto names = codec.column_names();
  const auto values = codec.flatten(scenario.truth);
  for (std::size_t p = 0; p < names.size(); ++p) params[names[p]] = values[p];

  nlohmann::json j;
  j["scenario"] = {{"n", scenario.n},
                   {"seed", scenario.seed},
                   {"visit_grid", scenario.visit_grid},
                   {"censoring", {{"distribution", "uniform"}, {"lo", scenario.censor_lo}, {"hi", scenario.censor_hi}}},
                   {"admin_cap", scenario.admin_cap},
                   {"visits_truncated_at_observed_time", true},
                   {"parameters", params},
                   {"model_spec", to_json(spec)}};
  auto subjects = nlohmann::json::array();
  for (const auto& st : truth) {
    auto risks = nlohmann::json::array();
    for (const auto& r : st.risks)
      risks.push_back({{"landmark", r.landmark}, {"horizon", r.horizon}, {"risk", finite_or_null(r.risk)}});
    subjects.push_back({{"id", st.id},
                        {"u", std::vector<double>(st.u.data(), st.u.data() + st.u.size())},
                        {"event_time", finite_or_null(st.event_time)},
                        {"censor_time", st.censor_time},
                        {"risks", risks}});
  }
  j["subjects"] = subjects;
  return j;
}

}  // namespace jointrait
