#include <gtest/gtest.h>

#include "coreattr/auction.hpp"

using namespace coreattr;
using namespace coreattr::auction;

TEST(Auction, ZeroBidNeverWins) {
  auto g = CompetitionDensity::uniform(1.0, 1e-3);
  EXPECT_DOUBLE_EQ(expected_utility(0.0, 0.6, 0.5, g), 0.5);
}

TEST(Auction, PointMass) {
  auto g = CompetitionDensity::point_mass(0.05);
  EXPECT_NEAR(expected_utility(0.1, 0.6, 0.5, g), 0.55, 1e-15);
  EXPECT_NEAR(expected_utility(0.04, 0.6, 0.5, g), 0.5, 1e-15);
}

TEST(Auction, TieAtBidCountsAsWin) {
  auto g = CompetitionDensity::point_mass(0.1);
  EXPECT_NEAR(expected_utility(0.1, 0.6, 0.5, g), 0.5, 1e-15);  // win, pay 0.1
  auto check = check_myopic(0.6, 0.5, g, 1e-3, 1.0);
  EXPECT_TRUE(check.passed);
}

TEST(Auction, UniformDensityPeaksAtIncrement) {
  auto g = CompetitionDensity::uniform(1.0, 1e-3);
  double best = -1, arg = -1;
  for (int k = 0; k <= 1000; ++k) {
    double b = k * 1e-3;
    double eu = expected_utility(b, 0.6, 0.5, g);
    if (eu > best + 1e-15) {
      best = eu;
      arg = b;
    }
  }
  EXPECT_NEAR(arg, 0.1, 1e-3 + 1e-12);
}

TEST(Auction, UtilityIsSinglePeakedAroundIncrement) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_density(rng);
    double vw = rng.uniform(0.2, 1.0), vl = rng.uniform(0.0, vw);
    double inc = vw - vl;
    double prev = expected_utility(0, vw, vl, g);
    for (int k = 1; k <= 1000; ++k) {
      double b = k * 1e-3;
      double eu = expected_utility(b, vw, vl, g);
      if (b <= inc) {
        EXPECT_GE(eu, prev - 1e-12);
      }
      if (b > inc + 1e-3) {
        EXPECT_LE(eu, prev + 1e-12);
      }
      prev = eu;
    }
  }
}

TEST(Auction, RandomFamilyHasNoViolations) {
  Rng rng(99);
  std::vector<CompetitionDensity> family;
  for (int i = 0; i < 10; ++i) family.push_back(random_density(rng));
  auto report = verify_myopic_optimality(family, random_value_pairs(rng, 5));
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.checks.size(), 50u);
  EXPECT_TRUE(report.to_json()["passed"].get<bool>());
}

TEST(Auction, EqualValuesMakeZeroBidOptimal) {
  Rng rng(1);
  auto g = random_density(rng);
  auto c = check_myopic(0.4, 0.4, g, 1e-3, 1.0);
  EXPECT_TRUE(c.passed);
  EXPECT_EQ(c.best_grid_bid, 0.0);
}

TEST(Auction, OverbiddingIsDetected) {
  // Misreport the increment by bidding on a value pair whose true increment
  // is far from the bid under test.
  auto g = CompetitionDensity::uniform(1.0, 1e-3);
  double truthful = expected_utility(0.1, 0.6, 0.5, g);
  double over = expected_utility(0.4, 0.6, 0.5, g);
  EXPECT_GT(truthful - over, 0.04);
}

TEST(Auction, InvalidInputs) {
  CompetitionDensity bad{{0.1, 0.2}, {0.5, 0.6}};
  EXPECT_THROW(bad.validate(), ValidationError);
  CompetitionDensity unsorted{{0.2, 0.1}, {0.5, 0.5}};
  EXPECT_THROW(unsorted.validate(), ValidationError);
  EXPECT_THROW(check_myopic(0.3, 0.5, CompetitionDensity::point_mass(0.1), 1e-3, 1.0), ParameterError);
}
