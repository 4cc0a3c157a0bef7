#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace jointrait;

namespace {

ModelSpec spline_spec(AssociationForm form) {
  auto spec = SimScenario::model_spec();
  spec.association = form;
  spec.design.theta_knots = {3, 6, 12};
  spec.design.hazard_knots = std::vector<double>{2, 9};
  spec.design.baseline_slope = true;
  return spec;
}

SubjectEffects effects(double u0, double u1) { return {Eigen::Vector2d(u0, u1)}; }

ParameterDraw constant_draw(const ModelSpec& spec) {
  auto d = ParameterDraw::zeros(spec);
  d.eta0 = std::log(0.1);
  return d;
}

SubjectRecord subject(double t, int event) {
  SubjectRecord s;
  s.id = "s";
  s.covariates = {{"x1", 1}, {"x2", 0}};
  s.observed_time = t;
  s.event = event;
  return s;
}

}  // namespace

TEST(LogHazard, ConstantWhenAssociationOff) {
  const auto spec = SimScenario::model_spec();
  const auto d = constant_draw(spec);
  for (double t : {0.0, 1.0, 7.5, 24.0})
    EXPECT_EQ(log_hazard({{"x1", 1}, {"x2", 0}}, t, d, effects(0.7, 0.2), spec), std::log(0.1));
}

TEST(LogHazard, RandomEffectsFormAtZeroEffectsEqualsNoAssociation) {
  const auto m3 = spline_spec(AssociationForm::random_effects);
  const auto m1 = spline_spec(AssociationForm::shared_latent);
  Rng rng = make_rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto d3 = fixtures::random_draw(m3, rng);
    auto d1 = d3;
    d1.assoc = {0.0};
    for (double t : {0.0, 2.5, 6.0, 10.0, 20.0})
      EXPECT_EQ(log_hazard({{"x1", 1}, {"x2", 0.4}}, t, d3, effects(0, 0), m3),
                log_hazard({{"x1", 1}, {"x2", 0.4}}, t, d1, effects(0, 0), m1));
  }
}

TEST(LogHazard, SlopeFormWithoutSlopeTermEqualsSharedLatent) {
  const auto m2 = spline_spec(AssociationForm::latent_and_slope);
  const auto m1 = spline_spec(AssociationForm::shared_latent);
  Rng rng = make_rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    auto d2 = fixtures::random_draw(m2, rng);
    d2.assoc[1] = 0.0;
    auto d1 = d2;
    d1.assoc = {d2.assoc[0]};
    for (double t : {0.0, 2.5, 6.0, 10.0, 20.0})
      EXPECT_DOUBLE_EQ(log_hazard({{"x1", 0}, {"x2", 0.4}}, t, d2, effects(0.3, -0.1), m2),
                       log_hazard({{"x1", 0}, {"x2", 0.4}}, t, d1, effects(0.3, -0.1), m1));
  }
}

TEST(Segmentize, NoKnotsGivesOneSegment) {
  const auto spec = SimScenario::model_spec();
  const auto d = SimScenario::standard().truth;
  const auto segs = segmentize({{"x1", 1}, {"x2", 60}}, 15.0, d, effects(0.1, 0.02), spec);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].t_lo, 0.0);
  EXPECT_EQ(segs[0].t_hi, 15.0);
}

TEST(Segmentize, SplitsAtKnotsBelowHorizon) {
  auto spec = SimScenario::model_spec();
  spec.design.theta_knots = {3, 6};
  auto d = ParameterDraw::zeros(spec);
  const auto segs = segmentize({{"x1", 1}, {"x2", 60}}, 5.0, d, effects(0, 0), spec);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].t_lo, 0.0);
  EXPECT_EQ(segs[0].t_hi, 3.0);
  EXPECT_EQ(segs[1].t_lo, 3.0);
  EXPECT_EQ(segs[1].t_hi, 5.0);
}

TEST(Segmentize, LinearPiecesMatchLogHazard) {
  for (auto form : {AssociationForm::shared_latent, AssociationForm::latent_and_slope, AssociationForm::random_effects}) {
    const auto spec = spline_spec(form);
    Rng rng = make_rng(8, static_cast<int>(form));
    std::uniform_real_distribution<double> time(0.0, 20.0);
    const auto d = fixtures::random_draw(spec, rng);
    const Covariates cov{{"x1", 1}, {"x2", 0.7}};
    const auto e = effects(0.4, -0.05);
    const auto segs = segmentize(cov, 20.0, d, e, spec);
    for (int i = 0; i < 100; ++i) {
      const double s = time(rng);
      const auto it = std::find_if(segs.begin(), segs.end(), [&](const HazardSegment& g) { return s <= g.t_hi; });
      ASSERT_NE(it, segs.end());
      const double direct = log_hazard(cov, s, d, e, spec);
      EXPECT_NEAR(it->intercept + it->slope * s, direct, 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST(CumulativeHazard, ConstantRectangle) {
  const double h = cumulative_hazard({{0.0, 10.0, std::log(0.1), 0.0}});
  EXPECT_NEAR(h, 1.0, 1e-15);
  EXPECT_NEAR(std::exp(-h), std::exp(-1.0), 1e-15);
}

TEST(CumulativeHazard, ExponentialRampMatchesQuadrature) {
  const HazardSegment seg{0.0, 2.0, std::log(0.1), 0.05};
  const double closed = cumulative_hazard({seg});
  const double quad = fixtures::quadrature_cumulative([](double t) { return std::log(0.1) + 0.05 * t; }, 0.0, 2.0);
  EXPECT_NEAR(closed, 0.1 * std::expm1(0.1) / 0.05, 1e-15);
  EXPECT_NEAR(closed, quad, 1e-12);
  EXPECT_NEAR(closed, 0.210341836, 1e-9);
}

TEST(CumulativeHazard, NearFlatBranchIsContinuous) {
  const double flat = cumulative_hazard({{1.0, 4.0, -1.0, 0.0}});
  const double tiny = cumulative_hazard({{1.0, 4.0, -1.0, 1e-12}});
  EXPECT_LT(std::abs(tiny - flat) / flat, 1e-10);
  // either side of the branch threshold, against the series e^{a+b lo} L (1 + bL/2 + (bL)^2/6)
  for (double b : {0.5e-8, 2e-8}) {
    const double series = std::exp(-1.0 + b) * 3.0 * (1.0 + 1.5 * b + 1.5 * b * b);
    EXPECT_LT(std::abs(cumulative_hazard({{1.0, 4.0, -1.0, b}}) - series) / series, 1e-14) << b;
  }
}

TEST(CumulativeHazard, OverflowRaises) {
  EXPECT_THROW(cumulative_hazard({{0.0, 1.0, 800.0, 0.0}}), HazardOverflow);
}

TEST(CumulativeHazard, AdditiveAndMonotone) {
  for (auto form : {AssociationForm::shared_latent, AssociationForm::latent_and_slope, AssociationForm::random_effects}) {
    const auto spec = spline_spec(form);
    Rng rng = make_rng(12, static_cast<int>(form));
    std::uniform_real_distribution<double> time(0.0, 20.0);
    for (int rep = 0; rep < 50; ++rep) {
      const auto d = fixtures::random_draw(spec, rng);
      const auto rows = DesignRows::build({{"x1", 0}, {"x2", 0.5}}, spec.design);
      const HazardModel model(spec, rows, d, Eigen::Vector2d(0.2, 0.05));
      double t1 = time(rng), t2 = time(rng);
      if (t1 > t2) std::swap(t1, t2);
      const double whole = model.cumulative(0.0, t2);
      EXPECT_NEAR(model.cumulative(0.0, t1) + model.cumulative(t1, t2), whole, 1e-12 * std::max(1.0, whole));
      EXPECT_LE(model.cumulative(0.0, t1), whole);
    }
  }
}

TEST(CumulativeHazard, AgreesWithQuadratureOnRandomConfigurations) {
  int checked = 0;
  for (auto form : {AssociationForm::shared_latent, AssociationForm::latent_and_slope, AssociationForm::random_effects}) {
    const auto spec = spline_spec(form);
    Rng rng = make_rng(21, static_cast<int>(form));
    std::uniform_real_distribution<double> time(0.5, 24.0);
    std::normal_distribution<double> n01;
    for (int rep = 0; rep < 100; ++rep) {
      const auto d = fixtures::random_draw(spec, rng);
      const Covariates cov{{"x1", static_cast<double>(rep % 2)}, {"x2", std::abs(n01(rng))}};
      const SubjectEffects e = effects(0.5 * n01(rng), 0.1 * n01(rng));
      const double upto = time(rng);
      const double closed = cumulative_hazard(segmentize(cov, upto, d, e, spec));
      const double quad = fixtures::quadrature_cumulative([&](double t) { return log_hazard(cov, t, d, e, spec); }, 0.0,
                                                         upto, {2, 3, 6, 9, 12});
      EXPECT_LT(std::abs(closed - quad) / quad, 1e-9);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 300);
}

TEST(SurvivalLoglik, EventClosedForm) {
  const auto spec = SimScenario::model_spec();
  EXPECT_NEAR(survival_loglik(subject(10, 1), constant_draw(spec), effects(0, 0), spec), std::log(0.1) - 1.0, 1e-14);
}

TEST(SurvivalLoglik, CensoredClosedForm) {
  const auto spec = SimScenario::model_spec();
  EXPECT_NEAR(survival_loglik(subject(10, 0), constant_draw(spec), effects(0, 0), spec), -1.0, 1e-14);
}

TEST(SurvivalLoglik, MatchesQuadrature) {
  const auto spec = spline_spec(AssociationForm::shared_latent);
  Rng rng = make_rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    const auto d = fixtures::random_draw(spec, rng);
    auto s = subject(1.0 + 0.4 * rep, rep % 2);
    s.covariates["x2"] = 0.3;
    const auto e = effects(0.2, 0.03);
    const double quad = fixtures::quadrature_cumulative(
        [&](double t) { return log_hazard(s.covariates, t, d, e, spec); }, 0.0, s.observed_time, {2, 3, 6, 9, 12});
    const double want = s.event * log_hazard(s.covariates, s.observed_time, d, e, spec) - quad;
    EXPECT_NEAR(survival_loglik(s, d, e, spec), want, 1e-9 * std::max(1.0, std::abs(want)));
  }
}

TEST(SurvivalLoglik, IgnoresLongitudinalParametersWithoutAssociation) {
  const auto spec = spline_spec(AssociationForm::shared_latent);
  Rng rng = make_rng(41);
  auto base = fixtures::random_draw(spec, rng);
  base.assoc = {0.0};
  const auto s = subject(8.0, 1);
  const double ref = survival_loglik(s, base, effects(0, 0), spec);
  for (int rep = 0; rep < 20; ++rep) {
    auto other = fixtures::random_draw(spec, rng);
    other.assoc = {0.0};
    other.gamma = base.gamma;
    other.eta0 = base.eta0;
    other.eta1 = base.eta1;
    other.xi = base.xi;
    other.sigma_xi = base.sigma_xi;
    EXPECT_EQ(survival_loglik(s, other, effects(3.0 * rep, -rep), spec), ref);
  }
}
