#include <gtest/gtest.h>

#include <sstream>
#include <unordered_set>

#include "coreattr/scenario.hpp"

using namespace coreattr;

TEST(Scenario, PrefixAndParent) {
  Scenario s{0, 1, 2};
  EXPECT_EQ(s.length(), 3u);
  EXPECT_EQ(s.prefix(1), Scenario{0});
  EXPECT_EQ(s.prefix(3), s);
  EXPECT_EQ(s.parent(), (Scenario{0, 1}));
  EXPECT_TRUE(Scenario{0}.parent().empty());
  EXPECT_THROW(s.prefix(0), BoundsError);
  EXPECT_THROW(s.prefix(4), BoundsError);
}

TEST(Scenario, PrefixOrder) {
  Scenario s{0, 1};
  EXPECT_TRUE(Scenario{}.is_prefix_of(s));
  EXPECT_TRUE(Scenario{0}.is_prefix_of(s));
  EXPECT_TRUE(s.is_prefix_of(s));
  EXPECT_FALSE(Scenario{1}.is_prefix_of(s));
  EXPECT_FALSE((Scenario{0, 1, 2}).is_prefix_of(s));
}

TEST(Scenario, EnumeratePrefixes) {
  auto p = enumerate_prefixes(Scenario{2, 2, 1});
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0], Scenario{2});
  EXPECT_EQ(p[1], (Scenario{2, 2}));
  EXPECT_EQ(p[2], (Scenario{2, 2, 1}));
}

TEST(Scenario, QualifiedActionsAreDistinct) {
  Scenario clicked{Action{0, 1}};
  Scenario ignored{Action{0, 0}};
  Scenario raw{0};
  EXPECT_NE(clicked, ignored);
  EXPECT_NE(clicked, raw);
  EXPECT_EQ(clicked.unqualified(), raw);
}

TEST(Scenario, TextRoundTrip) {
  Scenario s{Action{3, 1}, Action{0}, Action{7, 0}};
  EXPECT_EQ(s.to_string(), "3:1,0,7:0");
  EXPECT_EQ(parse_scenario(s.to_string()), s);
  EXPECT_TRUE(parse_scenario("").empty());
  EXPECT_THROW(parse_scenario("1,,2"), ParseError);
  EXPECT_THROW(parse_scenario("x"), ParseError);
  std::ostringstream os;
  os << Scenario{1, 2};
  EXPECT_EQ(os.str(), "(1,2)");
}

TEST(Scenario, HashDistinguishesOrder) {
  std::unordered_set<Scenario> set{Scenario{0, 1}, Scenario{1, 0}, Scenario{0, 1}};
  EXPECT_EQ(set.size(), 2u);
}
