#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coreattr/attribution.hpp"
#include "coreattr/dataset.hpp"
#include "coreattr/fixed_point.hpp"
#include "coreattr/learner.hpp"
#include "coreattr/oracle.hpp"
#include "coreattr/random.hpp"

namespace coreattr::synth {

inline constexpr ActionId kDisplayA = 0;
inline constexpr ActionId kDisplayB = 1;

/// Timeline (A) with probability p, otherwise (A, B); conversion
/// probabilities c1 and c2 respectively.
struct TwoScenarioModel {
  double p = 1.0 / 3.0;
  double c1 = 0.5;
  double c2 = 0.6;

  void validate() const {
    if (!(p >= 0 && p <= 1)) throw ParameterError("p must lie in [0, 1]");
    if (!(c1 >= 0 && c1 <= 1 && c2 >= 0 && c2 <= 1)) throw ParameterError("conversion probabilities must lie in [0, 1]");
  }

  static Scenario short_scenario() { return Scenario{kDisplayA}; }
  static Scenario long_scenario() { return Scenario{kDisplayA, kDisplayB}; }

  GenerativeModel generative_model() const {
    validate();
    GenerativeModel m;
    m.probabilities = {{short_scenario(), p}, {long_scenario(), 1 - p}};
    m.values = {{short_scenario(), c1}, {long_scenario(), c2}};
    return m;
  }
};

/// T independent timelines: scenario ~ P, reward ~ Bernoulli(V(scenario)).
inline Dataset sample(const GenerativeModel& model, std::size_t count, std::uint64_t seed) {
  model.validate();
  std::vector<double> weights;
  for (const auto& [s, p] : model.probabilities) weights.push_back(p);
  Rng rng(seed);
  std::vector<TimelineRecord> records;
  records.reserve(count);
  const std::size_t digits = std::to_string(count).size();
  for (std::size_t t = 0; t < count; ++t) {
    const auto& s = model.probabilities[rng.categorical(weights)].first;
    double reward = rng.bernoulli(model.values.at(s)) ? 1.0 : 0.0;
    std::string id = std::to_string(t);
    id = "t" + std::string(digits - id.size(), '0') + id;
    records.push_back(make_record(std::move(id), s, reward));
  }
  auto header = header_for(model);
  return Dataset(header, std::move(records));
}

inline Dataset sample(const TwoScenarioModel& model, std::size_t count, std::uint64_t seed) {
  return sample(model.generative_model(), count, seed);
}

/// Two display types over timelines of length <= 3: V depends only on the
/// number of A displays, so appending B never changes the reward. Timelines
/// ending in B carry more mass, the B display sitting right before a
/// potential conversion.
inline GenerativeModel motivating_example_model() {
  const double lift[] = {0.0, 0.3, 0.5, 0.6};
  GenerativeModel m;
  std::vector<Scenario> all;
  for (std::size_t len = 1; len <= 3; ++len) {
    for (std::size_t code = 0; code < (1u << len); ++code) {
      std::vector<Action> actions;
      for (std::size_t i = 0; i < len; ++i) actions.emplace_back(static_cast<ActionId>((code >> (len - 1 - i)) & 1));
      all.emplace_back(std::move(actions));
    }
  }
  double total = 0;
  std::vector<double> w;
  for (const auto& s : all) {
    double weight = s.back().id == kDisplayB ? 4.0 : 1.0;
    w.push_back(weight);
    total += weight;
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::size_t a_count = 0;
    for (const auto& a : all[i].actions()) a_count += a.id == kDisplayA;
    m.probabilities.emplace_back(all[i], w[i] / total);
    m.values[all[i]] = lift[a_count];
  }
  return m;
}

/// Random model over every scenario of length <= max_length on `actions`
/// display types. All scenarios carry positive mass, and V increases
/// strictly along every extension while staying below 1.
inline GenerativeModel random_monotone_model(Rng& rng, std::size_t actions, std::size_t max_length) {
  if (actions < 1 || max_length < 1) throw ParameterError("need at least one action and length 1");
  GenerativeModel m;
  std::vector<Scenario> frontier{Scenario{}};
  std::map<Scenario, double> value{{Scenario{}, 0.0}};
  std::vector<double> weights;
  for (std::size_t len = 1; len <= max_length; ++len) {
    std::vector<Scenario> next;
    for (const auto& parent : frontier) {
      for (std::size_t a = 0; a < actions; ++a) {
        Scenario s = parent.extended(Action{static_cast<ActionId>(a)});
        double headroom = 1.0 - value[parent];
        value[s] = value[parent] + headroom * rng.uniform(0.05, 0.6);
        m.values[s] = value[s];
        m.probabilities.emplace_back(s, 0.0);
        weights.push_back(rng.uniform(0.05, 1.0));
        next.push_back(s);
      }
    }
    frontier = std::move(next);
  }
  double total = 0;
  for (double w : weights) total += w;
  for (std::size_t i = 0; i < weights.size(); ++i) m.probabilities[i].second = weights[i] / total;
  return m;
}

/// Synthetic corpus with categorical context features: each display has a
/// conversion lift driven by its features; type-B displays add nothing but
/// tend to close timelines. V(s) = min(1, sum of lifts).
struct CategoricalCorpusConfig {
  std::size_t timelines = 100000;
  std::size_t features = 10;
  std::size_t vocabulary = 8;
  std::size_t max_length = 4;
  double b_closing_probability = 0.7;
  double base_lift = 0.06;
  std::uint64_t seed = 0;
};

inline Dataset categorical_corpus(const CategoricalCorpusConfig& cfg) {
  if (cfg.max_length < 2) throw ParameterError("max_length must be >= 2");
  Rng rng(cfg.seed);
  // Per (feature, value) log-effect on the lift of an A display.
  std::vector<std::vector<double>> effect(cfg.features, std::vector<double>(cfg.vocabulary));
  for (auto& f : effect) {
    for (auto& e : f) e = rng.uniform(-0.8, 0.8);
  }
  std::vector<TimelineRecord> records;
  records.reserve(cfg.timelines);
  const std::size_t digits = std::to_string(cfg.timelines).size();
  for (std::size_t t = 0; t < cfg.timelines; ++t) {
    std::size_t a_count = 1 + rng.below(cfg.max_length - 1);
    bool closing_b = rng.bernoulli(cfg.b_closing_probability);
    TimelineRecord r;
    std::string id = std::to_string(t);
    r.timeline_id = "u" + std::string(digits - id.size(), '0') + id;
    std::vector<Action> actions;
    double lift = 0;
    for (std::size_t i = 0; i < a_count + (closing_b ? 1 : 0); ++i) {
      bool is_b = i == a_count;
      FeatureMap fm;
      double log_effect = 0;
      for (std::size_t f = 0; f < cfg.features; ++f) {
        std::size_t v = rng.below(cfg.vocabulary);
        fm.push_back({"cat" + std::to_string(f + 1), std::to_string(v)});
        log_effect += effect[f][v];
      }
      actions.emplace_back(is_b ? kDisplayB : kDisplayA);
      r.display_features.push_back(std::move(fm));
      if (!is_b) lift += cfg.base_lift * std::exp(log_effect / std::sqrt(static_cast<double>(cfg.features)));
    }
    r.scenario = Scenario(std::move(actions));
    r.reward = rng.bernoulli(std::min(1.0, lift)) ? 1.0 : 0.0;
    records.push_back(std::move(r));
  }
  return Dataset(DatasetHeader{2, 0, cfg.max_length}, std::move(records));
}

struct SweepConfig {
  enum class Mode { exact, sampled } mode = Mode::exact;
  std::size_t timelines = 10000;  // sampled mode
  std::uint64_t seed = 0;
  FixedPointConfig fixed_point{0.0, 5000, 1e-6, 1e-13};
  double c1 = 0.5;
  double c2 = 0.6;
};

struct SweepPoint {
  double p = 0;
  double core_a = NAN, core_b = NAN;
  double last_touch_a = NAN, last_touch_b = NAN;
  std::size_t iterations = 0;
  std::optional<std::string> error;
};

/// Core (fixed point, averaging learner) and last-touch valuations of the two
/// display types for each p, holding V fixed.
inline std::vector<SweepPoint> robustness_sweep(const std::vector<double>& ps, const SweepConfig& cfg = {}) {
  std::vector<SweepPoint> out;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    SweepPoint pt;
    pt.p = ps[k];
    try {
      if (!(ps[k] > 0 && ps[k] < 1)) throw ParameterError("sweep p must lie in (0, 1)");
      TwoScenarioModel model{ps[k], cfg.c1, cfg.c2};
      Dataset data = cfg.mode == SweepConfig::Mode::exact
                         ? to_weighted_dataset(exact_oracle(model.generative_model()))
                         : sample(model, cfg.timelines, mix64(cfg.seed + k));
      AveragingLearner learner;
      auto lt = learner.train(build_prefix_dataset(data, last_touch_attribution(data)));
      auto a_rec = make_record("", TwoScenarioModel::long_scenario(), 0.0);
      pt.last_touch_a = (*lt)(a_rec, 1);
      pt.last_touch_b = (*lt)(a_rec, 2);
      auto state = run_fixed_point(data, learner, last_touch_attribution(data), cfg.fixed_point);
      pt.core_a = (*state.valuation)(a_rec, 1);
      pt.core_b = (*state.valuation)(a_rec, 2);
      pt.iterations = state.iteration;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace coreattr::synth
