#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coreattr/attribution.hpp"
#include "coreattr/dataset.hpp"
#include "coreattr/valuation.hpp"

namespace coreattr {

/// One (x, y) pair of the label dataset: prefix `length` of record `record`.
struct LabeledPrefix {
  std::size_t record;
  std::size_t length;
  double label;
  double weight;
};

/// Label dataset built from an attribution table, in deterministic record
/// then position order.
struct PrefixDataset {
  const Dataset* data = nullptr;
  std::vector<LabeledPrefix> entries;

  const TimelineRecord& record(const LabeledPrefix& e) const { return (*data)[e.record]; }
};

inline PrefixDataset build_prefix_dataset(const Dataset& data, const AttributionTable& mu) {
  if (mu.size() != data.size()) throw ValidationError("attribution table does not match dataset");
  PrefixDataset d{&data, {}};
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& r = data[n];
    for (std::size_t j = 1; j <= r.length(); ++j) {
      d.entries.push_back({n, j, mu.rows[n][j - 1], r.weight});
    }
  }
  return d;
}

/// Step-2 backend of the fixed-point loop.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual ValuationPtr train(const PrefixDataset& d) = 0;
  virtual std::string name() const = 0;
};

/// nu(s) = weighted mean label over entries keyed by the prefix scenario.
class AveragingLearner final : public Learner {
 public:
  explicit AveragingLearner(ValuationFallback fallback = ValuationFallback::error())
      : fallback_(std::move(fallback)) {}

  ValuationPtr train(const PrefixDataset& d) override { return train_table(d); }

  std::shared_ptr<TabularValuation> train_table(const PrefixDataset& d) const {
    std::unordered_map<Scenario, std::pair<double, double>> acc;
    for (const auto& e : d.entries) {
      auto& [num, den] = acc[d.record(e).scenario.prefix(e.length)];
      num += e.weight * e.label;
      den += e.weight;
    }
    auto out = std::make_shared<TabularValuation>(fallback_);
    for (const auto& [s, nd] : acc) out->set(s, nd.first / nd.second);
    return out;
  }

  struct ScenarioLabel {
    Scenario scenario;
    double label;
    double weight = 1.0;
  };

  /// Same estimator on an explicit (scenario, label, weight) list.
  TabularValuation train_labels(const std::vector<ScenarioLabel>& labels) const {
    std::unordered_map<Scenario, std::pair<double, double>> acc;
    for (const auto& l : labels) {
      auto& [num, den] = acc[l.scenario];
      num += l.weight * l.label;
      den += l.weight;
    }
    TabularValuation out(fallback_);
    for (const auto& [s, nd] : acc) out.set(s, nd.first / nd.second);
    return out;
  }

  std::string name() const override { return "averaging"; }

 private:
  ValuationFallback fallback_;
};

}  // namespace coreattr
