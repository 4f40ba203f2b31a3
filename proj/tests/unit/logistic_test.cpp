#include <gtest/gtest.h>

#include <sstream>

#include "coreattr/attribution.hpp"
#include "coreattr/hashing.hpp"
#include "coreattr/logistic.hpp"
#include "coreattr/synthgen.hpp"

using namespace coreattr;

namespace {

LogisticProblem random_problem(std::uint64_t seed, std::size_t n = 60, std::uint32_t bits = 4) {
  Rng rng(seed);
  LogisticProblem p;
  p.bits = bits;
  p.lambda = 0.05;
  for (std::size_t i = 0; i < n; ++i) {
    HashedFeatureVector x;
    x.bits = bits;
    for (std::uint32_t j = 0; j < (1u << bits); ++j) {
      if (rng.bernoulli(0.3)) x.entries.emplace_back(j, rng.uniform(-1, 1));
    }
    p.inputs.push_back(x);
    p.labels.push_back(rng.uniform());
    p.weights.push_back(rng.uniform(0.5, 2.0));
  }
  return p;
}

}  // namespace

TEST(Hashing, Fnv1aVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hashing, FeaturizeIsSortedAndBounded) {
  auto r = make_record("t", Scenario{0, 1}, 1);
  r.display_features[1] = {{"cat1", "x"}, {"cat2", "y"}};
  auto x = featurize(r, 2, 3);
  for (std::size_t k = 0; k < x.entries.size(); ++k) {
    EXPECT_LT(x.entries[k].first, 8u);
    if (k) {
      EXPECT_LT(x.entries[k - 1].first, x.entries[k].first);
    }
  }
  double total = 0;
  for (const auto& [i, v] : x.entries) total += v;
  EXPECT_EQ(total, 5.0);  // pos, action, prev and two raw features; collisions add up
  EXPECT_THROW(featurize(r, 3), BoundsError);
  EXPECT_THROW(featurize(r, 1, 0), ParameterError);
}

TEST(Hashing, NumericFeatures) {
  auto r = make_record("t", Scenario{0}, 1);
  r.display_features[0] = {{"age", "2.5"}};
  FeatureRecipe recipe;
  recipe.position = recipe.action = recipe.previous_action = false;
  recipe.numeric_keys = {"age"};
  auto x = featurize(r, 1, 13, recipe);
  ASSERT_EQ(x.entries.size(), 1u);
  EXPECT_EQ(x.entries[0].second, 2.5);
  r.display_features[0] = {{"age", "old"}};
  EXPECT_THROW(featurize(r, 1, 13, recipe), ValidationError);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  auto p = random_problem(11);
  Rng rng(2);
  std::vector<double> w(1u << p.bits);
  for (auto& v : w) v = rng.uniform(-0.5, 0.5);
  double b = 0.3;
  auto g = p.gradient(w, b);
  const double h = 1e-6;
  for (std::size_t j = 0; j < w.size(); ++j) {
    auto up = w, down = w;
    up[j] += h;
    down[j] -= h;
    double fd = (p.loss(up, b) - p.loss(down, b)) / (2 * h);
    EXPECT_NEAR(g[j], fd, 1e-7) << "coordinate " << j;
  }
  double fd_b = (p.loss(w, b + h) - p.loss(w, b - h)) / (2 * h);
  EXPECT_NEAR(g.back(), fd_b, 1e-7);
}

TEST(Logistic, CrossEntropyIsStableForExtremeLogits) {
  EXPECT_NEAR(cross_entropy_logit(800, 1.0), 0.0, 1e-12);
  EXPECT_NEAR(cross_entropy_logit(-800, 1.0), 800.0, 1e-9);
  EXPECT_NEAR(sigmoid(-800), 0.0, 1e-300);
}

TEST(Logistic, TrainingDecreasesLoss) {
  auto p = random_problem(5, 200);
  LogisticConfig cfg;
  cfg.hash_bits = p.bits;
  cfg.lambda = p.lambda;
  cfg.epochs = 200;
  cfg.step = 0.5;
  cfg.batch = 200;  // full batch: constant-step SGD would stall at its noise floor
  FeatureRecipe recipe;
  LogisticModel m(p.bits, recipe);
  double before = p.loss(m.weights(), m.intercept());
  train_logistic(m, p, cfg, 9);
  double after = p.loss(m.weights(), m.intercept());
  EXPECT_LT(after, before);
  // Near a stationary point of the full objective.
  auto g = p.gradient(m.weights(), m.intercept());
  double norm = 0;
  for (double v : g) norm = std::max(norm, std::abs(v));
  EXPECT_LT(norm, 5e-3);
}

TEST(Logistic, SeedDeterminism) {
  auto p = random_problem(7, 100);
  LogisticConfig cfg;
  cfg.hash_bits = p.bits;
  cfg.batch = 16;
  LogisticModel a(p.bits, {}), b(p.bits, {}), c(p.bits, {});
  train_logistic(a, p, cfg, 1);
  train_logistic(b, p, cfg, 1);
  train_logistic(c, p, cfg, 2);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(a.intercept(), b.intercept());
  EXPECT_NE(a.weights(), c.weights());
}

TEST(Logistic, RegularizationPathShrinksWeights) {
  auto p = random_problem(3, 150);
  double previous = INFINITY;
  for (double lambda : {1e-4, 1e-2, 1e-1, 1.0}) {
    LogisticConfig cfg;
    cfg.hash_bits = p.bits;
    cfg.lambda = lambda;
    cfg.epochs = 300;
    cfg.step = 0.3;
    cfg.batch = 150;
    LogisticModel m(p.bits, {});
    train_logistic(m, p, cfg, 0);
    EXPECT_LT(m.norm(), previous) << "lambda " << lambda;
    previous = m.norm();
  }
}

TEST(Logistic, FractionalLabelsRecoverTheMean) {
  // One indicator feature per group: the unregularized optimum predicts each
  // group's weighted mean label.
  LogisticProblem p;
  p.bits = 2;
  p.lambda = 0;
  const double means[] = {0.2, 0.7};
  Rng rng(1);
  double sums[2] = {0, 0}, ws[2] = {0, 0};
  for (int i = 0; i < 400; ++i) {
    int grp = i % 2;
    HashedFeatureVector x;
    x.bits = 2;
    x.entries = {{static_cast<std::uint32_t>(grp), 1.0}};
    double y = std::clamp(means[grp] + rng.uniform(-0.2, 0.2), 0.0, 1.0);
    double w = rng.uniform(0.5, 1.5);
    p.inputs.push_back(x);
    p.labels.push_back(y);
    p.weights.push_back(w);
    sums[grp] += w * y;
    ws[grp] += w;
  }
  LogisticConfig cfg;
  cfg.hash_bits = 2;
  cfg.lambda = 0;
  cfg.epochs = 2000;
  cfg.step = 2.0;
  cfg.batch = 400;
  LogisticModel m(2, {});
  train_logistic(m, p, cfg, 0);
  for (int grp = 0; grp < 2; ++grp) {
    HashedFeatureVector x;
    x.bits = 2;
    x.entries = {{static_cast<std::uint32_t>(grp), 1.0}};
    EXPECT_NEAR(m.predict(x), sums[grp] / ws[grp], 1e-6);
  }
}

TEST(Logistic, NonFiniteLossReportsLocation) {
  auto p = random_problem(1, 10);
  p.labels[0] = NAN;
  LogisticConfig cfg;
  cfg.hash_bits = p.bits;
  LogisticModel m(p.bits, {});
  try {
    train_logistic(m, p, cfg, 0);
    FAIL() << "expected a training error";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

TEST(Logistic, LearnerFitsLastTouchLabels) {
  auto data = to_weighted_dataset(exact_oracle(synth::TwoScenarioModel{}.generative_model()));
  LogisticConfig cfg;
  cfg.lambda = 0;
  cfg.epochs = 3000;
  cfg.step = 4.0;
  cfg.batch = 8;
  LogisticLearner learner(cfg);
  auto nu = learner.train(build_prefix_dataset(data, last_touch_attribution(data)));
  auto r = make_record("", Scenario{0, 1}, 0);
  EXPECT_NEAR((*nu)(r, 1), 1.0 / 6.0, 1e-3);
  EXPECT_NEAR((*nu)(r, 2), 0.6, 1e-3);
}

TEST(Logistic, LearnerRejectsNegativeLabels) {
  Dataset d(DatasetHeader{1, 0, 1}, {make_record("x", Scenario{0}, 1)});
  AttributionTable mu{{{-1.0}}, {1.0}};
  LogisticLearner learner;
  EXPECT_THROW(learner.train(build_prefix_dataset(d, mu)), TrainingError);
}

TEST(Logistic, SerializationRoundTrip) {
  FeatureRecipe recipe;
  recipe.numeric_keys = {"x"};
  LogisticModel m(6, recipe);
  m.weights()[3] = 0.1 + 0.2;
  m.weights()[17] = -1e-300;
  m.set_intercept(-2.0 / 3.0);
  m.set_scale(1.5);
  m.lambda = 1e-4;
  m.seed = 42;
  std::stringstream io;
  write_logistic(io, m);
  auto back = read_logistic(io);
  EXPECT_EQ(back.weights(), m.weights());
  EXPECT_EQ(back.intercept(), m.intercept());
  EXPECT_EQ(back.scale(), m.scale());
  EXPECT_EQ(back.bits(), 6u);
  EXPECT_EQ(back.recipe().numeric_keys, recipe.numeric_keys);
  EXPECT_EQ(back.seed, 42u);
}

TEST(Logistic, SerializationDetectsRecipeTampering) {
  LogisticModel m(4, {});
  std::stringstream io;
  write_logistic(io, m);
  std::string text = io.str();
  auto pos = text.find("\"recipe_flags\":[true");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 20, "\"recipe_flags\":[false");
  std::istringstream in(text);
  EXPECT_THROW(read_logistic(in), ParseError);
}
