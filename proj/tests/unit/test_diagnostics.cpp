#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace jointrait;

TEST(GelmanRubin, IdenticalShortChains) {
  // W = 5/3, B = 0, V = (3/4) W, so R̂ = sqrt(3/4).
  EXPECT_NEAR(gelman_rubin({{1, 2, 3, 4}, {1, 2, 3, 4}}), std::sqrt(0.75), 1e-15);
}

TEST(GelmanRubin, LongIidChainsNearOne) {
  Rng rng = make_rng(2024);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> chains(2, std::vector<double>(100000));
  for (auto& c : chains)
    for (auto& x : c) x = n01(rng);
  const double r = gelman_rubin(chains);
  EXPECT_GE(r, 0.999);
  EXPECT_LE(r, 1.005);
}

TEST(GelmanRubin, DisjointSupportsFlagged) {
  std::vector<double> a, b;
  for (int i = 0; i < 100; ++i) {
    a.push_back(0.01 * i);
    b.push_back(10.0 + 0.01 * i);
  }
  EXPECT_GT(gelman_rubin({a, b}), 10.0);
}

TEST(GelmanRubin, ConstantChains) {
  EXPECT_EQ(gelman_rubin({{1, 1, 1}, {1, 1, 1}}), 1.0);
  EXPECT_TRUE(std::isinf(gelman_rubin({{1, 1, 1}, {2, 2, 2}})));
}

TEST(GelmanRubin, RejectsBadShapes) {
  EXPECT_THROW(gelman_rubin({{1, 2, 3}}), std::invalid_argument);
  EXPECT_THROW(gelman_rubin({{1, 2, 3}, {1, 2}}), std::invalid_argument);
  EXPECT_THROW(gelman_rubin({{1}, {2}}), std::invalid_argument);
}
