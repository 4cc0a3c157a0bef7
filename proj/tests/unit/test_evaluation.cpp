#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace jointrait;

namespace {

EvalConfig window(double landmark, double horizon) {
  EvalConfig c;
  c.landmark = landmark;
  c.horizon = horizon;
  return c;
}

// Cases die inside (0, 10], controls after it.
std::vector<EvalRecord> cases_and_controls(std::vector<double> cases, std::vector<double> controls) {
  std::vector<EvalRecord> out;
  for (double r : cases) out.push_back({"c", r, 5.0, 1});
  for (double r : controls) out.push_back({"k", r, 12.0, 1});
  return out;
}

std::vector<EvalRecord> km_fixture() {
  return {{"0", 0.50, 5, 0}, {"1", 0.45, 2, 1}, {"2", 0.55, 4, 0}, {"3", 0.58, 6, 1}, {"4", 0.90, 3, 1}};
}

}  // namespace

TEST(KernelKm, HandComputedWindow) {
  // window around 0.50 holds records 1..3; the only event by t=5 is at t=2
  // with three at risk
  EXPECT_NEAR(kernel_km(km_fixture(), 0, 5.0, 0.1), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(kernel_km(km_fixture(), 0, 7.0, 0.1), 0.0);
}

TEST(KernelKm, WideKernelIsLeaveOneOutKm) {
  // others: events at 2 (4 at risk) and 3 (3 at risk)
  EXPECT_NEAR(kernel_km(km_fixture(), 0, 5.0, 1.0), 0.75 * (2.0 / 3.0), 1e-15);
}

TEST(KernelKm, NoEventsBeforeTimeGivesOne) { EXPECT_EQ(kernel_km(km_fixture(), 0, 1.0, 0.1), 1.0); }

TEST(KernelKm, EmptyWindowFallsBackToAllOthers) {
  EXPECT_NEAR(kernel_km(km_fixture(), 4, 5.0, 0.1), 0.75, 1e-15);
}

TEST(CensoringWeight, Cases) {
  EXPECT_EQ(censoring_weight({"a", 0.5, 5, 1}, 3, 8, 0.4, 0.5).weight, 1.0);
  EXPECT_EQ(censoring_weight({"a", 0.5, 2, 1}, 3, 8, 0.4, 0.5).weight, 0.0);
  EXPECT_EQ(censoring_weight({"a", 0.5, 9, 0}, 3, 8, 0.4, 0.5).weight, 0.0);
  EXPECT_NEAR(censoring_weight({"a", 0.5, 5, 0}, 3, 8, 0.8, 1.0).weight, 0.2, 1e-15);
  const auto d = censoring_weight({"a", 0.5, 5, 0}, 3, 8, 0.0, 0.0);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.weight, 0.0);
}

TEST(RocAuc, PerfectSeparation) {
  EXPECT_NEAR(roc_auc(cases_and_controls({0.9, 0.7}, {0.4, 0.2}), window(0, 10)).auc, 1.0, 1e-15);
}

TEST(RocAuc, ThreeOfFourPairsConcordant) {
  EXPECT_NEAR(roc_auc(cases_and_controls({0.9, 0.3}, {0.5, 0.1}), window(0, 10)).auc, 0.75, 1e-15);
}

TEST(RocAuc, ConstantPredictions) {
  EXPECT_NEAR(roc_auc(cases_and_controls({0.4, 0.4, 0.4}, {0.4, 0.4}), window(0, 10)).auc, 0.5, 1e-15);
}

TEST(RocAuc, UndefinedWithoutControls) {
  const auto r = roc_auc(cases_and_controls({0.9, 0.3}, {}), window(0, 10));
  EXPECT_FALSE(r.defined);
  EXPECT_TRUE(std::isnan(r.auc));
  EXPECT_FALSE(r.warnings.empty());
}

TEST(RocAuc, EqualsConcordanceWhenUncensored) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto recs = fixtures::uncensored_fixture(30, seed);
    const double auc = roc_auc(recs, window(2, 10)).auc;
    EXPECT_NEAR(auc, fixtures::brute_force_concordance(recs, 2, 10), 1e-12) << seed;
  }
}

TEST(RocAuc, InvariantToMonotoneTransform) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto recs = fixtures::uncensored_fixture(25, seed);
    const double before = roc_auc(recs, window(2, 10)).auc;
    for (auto& r : recs) r.risk = std::pow(r.risk, 3.0);
    EXPECT_NEAR(roc_auc(recs, window(2, 10)).auc, before, 1e-12);
  }
}

TEST(RocAuc, SensitivityAndSpecificityMonotoneInCutoff) {
  Rng rng = make_rng(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<EvalRecord> recs;
  for (int i = 0; i < 60; ++i) recs.push_back({std::to_string(i), unif(rng), 20.0 * unif(rng), unif(rng) < 0.6 ? 1 : 0});
  const auto r = roc_auc(recs, window(2, 10));
  ASSERT_TRUE(r.defined);
  ASSERT_EQ(r.points.size(), 201u);
  for (std::size_t g = 1; g < r.points.size(); ++g) {
    EXPECT_LE(r.points[g].sensitivity, r.points[g - 1].sensitivity);
    EXPECT_GE(r.points[g].specificity, r.points[g - 1].specificity);
  }
  EXPECT_GE(r.auc, 0.0);
  EXPECT_LE(r.auc, 1.0);
}

TEST(KmSurvival, EventAndCensoringCurves) {
  const auto recs = fixtures::brier_fixture();
  EXPECT_NEAR(km_survival(recs, 6, false), 0.8 * (2.0 / 3.0), 1e-15);
  EXPECT_NEAR(km_survival(recs, 6, true), (5.0 / 6.0) * 0.75, 1e-15);
}

TEST(Brier, PerfectPrediction) {
  std::vector<EvalRecord> recs{{"a", 1.0, 4, 1}, {"b", 1.0, 7, 1}, {"c", 0.0, 11, 1}, {"d", 0.0, 15, 1}};
  EXPECT_EQ(brier(recs, window(2, 8)).score, 0.0);
}

TEST(Brier, CoinFlip) {
  std::vector<EvalRecord> recs{{"a", 0.5, 4, 1}, {"b", 0.5, 7, 1}, {"c", 0.5, 11, 1}, {"d", 0.5, 15, 1}};
  EXPECT_EQ(brier(recs, window(2, 8)).score, 0.25);
}

TEST(Brier, MixedCensoringFixture) {
  // censoring KM: 5/6 from t=1, 5/8 from t=5; weights 1 at t=4 and 4/3 at
  // t=6 and beyond the horizon; the censoring at t=5 gets 0
  //   (0.04 + 4/3 (0.16 + 0.04 + 0.01)) / 5 = 0.064
  const auto r = brier(fixtures::brier_fixture(), window(2, 8));
  EXPECT_EQ(r.at_risk, 5);
  EXPECT_NEAR(r.score, 0.064, 1e-15);
  auto cfg = window(2, 8);
  cfg.brier_km = BrierKm::event;
  // event KM: 4/5 from t=4, 8/15 from t=6
  //   (5/4 0.04 + 15/8 (0.16 + 0.04 + 0.01)) / 5 = 0.08875
  EXPECT_NEAR(brier(fixtures::brier_fixture(), cfg).score, 0.08875, 1e-15);
}

TEST(Brier, InvariantToRecordOrder) {
  auto recs = fixtures::brier_fixture();
  const double before = brier(recs, window(2, 8)).score;
  std::reverse(recs.begin(), recs.end());
  std::rotate(recs.begin(), recs.begin() + 2, recs.end());
  EXPECT_NEAR(brier(recs, window(2, 8)).score, before, 1e-15);
}

TEST(Brier, UndefinedWithNobodyAtRisk) {
  const auto r = brier({{"a", 0.1, 1, 1}}, window(2, 8));
  EXPECT_FALSE(r.defined);
  EXPECT_EQ(r.at_risk, 0);
}

TEST(EvalConfig, RejectsBadWindowAndGrid) {
  EXPECT_THROW(window(8, 2).validate(), ConfigError);
  auto c = window(2, 8);
  c.grid = 200;
  EXPECT_THROW(c.validate(), ConfigError);
  c.grid = 201;
  c.bandwidth = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Evaluation, RejectsRiskOutsideUnitInterval) {
  EXPECT_THROW(brier({{"a", 1.5, 4, 1}}, window(2, 8)), DataError);
}
