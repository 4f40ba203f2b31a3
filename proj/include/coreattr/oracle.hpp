#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coreattr/dataset.hpp"
#include "coreattr/error.hpp"
#include "coreattr/scenario.hpp"
#include "coreattr/text.hpp"

namespace coreattr {

/// Exact distribution over completed scenarios plus the reward function.
/// `values` may define V on scenarios that carry no probability mass.
struct GenerativeModel {
  std::vector<std::pair<Scenario, double>> probabilities;
  std::map<Scenario, double> values;

  void validate() const {
    double total = 0;
    for (const auto& [s, p] : probabilities) {
      if (s.empty()) throw ValidationError("empty scenario in generative model");
      if (!(p >= 0)) throw ValidationError("negative probability for " + s.to_string());
      if (!values.count(s)) throw ValidationError("no conversion probability for " + s.to_string());
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("scenario probabilities sum to " + text::format_double(total));
    }
    for (const auto& [s, v] : values) {
      if (!(v >= 0 && v <= 1)) throw ValidationError("conversion probability outside [0,1] for " + s.to_string());
    }
  }
};

enum class OracleMode { empirical, exact };
enum class Estimator { exact_match, prefix_pooled };
enum class OracleFallback { error, zero, backoff };

/// Reward function V and scenario distribution P, fitted from data or taken
/// from a generative model. Masses are record weights (empirical) or
/// probabilities (exact).
class RewardOracle {
 public:
  struct Entry {
    double mass = 0;            // weight of timelines whose scenario is exactly s
    double reward_mass = 0;     // weighted reward sum of those timelines
    double superset_mass = 0;   // weight of timelines whose scenario extends s
    double superset_reward = 0;
    std::size_t count = 0;           // records exactly s
    std::size_t superset_count = 0;  // records extending s
    std::optional<double> declared;  // exact mode value
  };

  RewardOracle() = default;
  RewardOracle(OracleMode mode, Estimator estimator, DatasetHeader header)
      : mode_(mode), estimator_(estimator), header_(header) {}

  OracleMode mode() const noexcept { return mode_; }
  Estimator estimator() const noexcept { return estimator_; }
  const DatasetHeader& header() const noexcept { return header_; }
  double total_mass() const noexcept { return total_mass_; }

  void set_fallback(OracleFallback f) { fallback_ = f; }
  OracleFallback fallback() const noexcept { return fallback_; }

  const Entry* find(const Scenario& s) const {
    auto it = entries_.find(s);
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// True when V(s) is defined without falling back.
  bool has_value(const Scenario& s) const {
    if (s.empty()) return true;
    const Entry* e = find(s);
    if (!e) return false;
    if (e->declared) return true;
    return estimator_ == Estimator::exact_match ? e->mass > 0 : e->superset_mass > 0;
  }

  /// V(s); V(empty) = 0. Unseen scenarios follow the fallback policy.
  double value(const Scenario& s) const {
    if (s.empty()) return 0.0;
    if (const Entry* e = find(s)) {
      if (e->declared) return *e->declared;
      if (estimator_ == Estimator::exact_match && e->mass > 0) return e->reward_mass / e->mass;
      if (estimator_ == Estimator::prefix_pooled && e->superset_mass > 0) {
        return e->superset_reward / e->superset_mass;
      }
    }
    switch (fallback_) {
      case OracleFallback::zero: return 0.0;
      case OracleFallback::backoff: {
        for (std::size_t i = s.length() - 1; i >= 1; --i) {
          auto p = s.prefix(i);
          if (has_value(p)) return value(p);
        }
        return 0.0;
      }
      default: throw UndefinedConditionalError("no reward estimate for scenario " + s.to_string());
    }
  }

  /// P(S = s)
  double probability(const Scenario& s) const {
    const Entry* e = find(s);
    return (e && total_mass_ > 0) ? e->mass / total_mass_ : 0.0;
  }

  /// P(S = s | S extends s), with optional add-alpha smoothing on the
  /// binary stop/continue event.
  double continuation_probability(const Scenario& s, double alpha = 0.0) const {
    const Entry* e = find(s);
    double completed = e ? e->mass : 0.0;
    double superset = e ? e->superset_mass : 0.0;
    if (superset + 2 * alpha <= 0) {
      throw UndefinedConditionalError("scenario " + s.to_string() + " never observed as a prefix");
    }
    return (completed + alpha) / (superset + 2 * alpha);
  }

  /// Every scenario that is a prefix of some supported timeline, or carries a
  /// declared value. Sorted.
  std::vector<Scenario> support() const {
    std::vector<Scenario> out;
    out.reserve(entries_.size());
    for (const auto& [s, e] : entries_) {
      if (e.superset_mass > 0 || e.declared) out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Scenarios with positive completed mass. Sorted.
  std::vector<Scenario> completed() const {
    std::vector<Scenario> out;
    for (const auto& [s, e] : entries_) {
      if (e.mass > 0) out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Accumulate one timeline of weight w and reward r.
  void add(const Scenario& s, double w, double r) {
    auto& e = entries_[s];
    e.mass += w;
    e.reward_mass += w * r;
    e.count += 1;
    for (std::size_t i = 1; i <= s.length(); ++i) {
      auto& p = i == s.length() ? e : entries_[s.prefix(i)];
      p.superset_mass += w;
      p.superset_reward += w * r;
      p.superset_count += 1;
    }
    total_mass_ += w;
  }

  void declare(const Scenario& s, double v) { entries_[s].declared = v; }

  /// Associative merge of two empirical oracles over the same alphabet.
  void merge(const RewardOracle& other) {
    for (const auto& [s, o] : other.entries_) {
      auto& e = entries_[s];
      e.mass += o.mass;
      e.reward_mass += o.reward_mass;
      e.superset_mass += o.superset_mass;
      e.superset_reward += o.superset_reward;
      e.count += o.count;
      e.superset_count += o.superset_count;
      if (o.declared) e.declared = o.declared;
    }
    total_mass_ += other.total_mass_;
  }

 private:
  OracleMode mode_ = OracleMode::empirical;
  Estimator estimator_ = Estimator::exact_match;
  OracleFallback fallback_ = OracleFallback::error;
  DatasetHeader header_;
  std::unordered_map<Scenario, Entry> entries_;
  double total_mass_ = 0;
};

inline RewardOracle fit_oracle(const Dataset& data, Estimator estimator = Estimator::exact_match) {
  if (data.empty()) throw EstimationError("cannot fit a reward oracle on an empty dataset");
  RewardOracle oracle(OracleMode::empirical, estimator, data.header());
  for (const auto& r : data.records()) oracle.add(r.scenario, r.weight, r.reward);
  return oracle;
}

/// Smallest header that covers every scenario of the model.
inline DatasetHeader header_for(const GenerativeModel& model) {
  DatasetHeader h{1, 0, 1};
  auto visit = [&h](const Scenario& s) {
    h.max_length = std::max(h.max_length, s.length());
    for (const auto& a : s.actions()) {
      h.alphabet_size = std::max<std::size_t>(h.alphabet_size, a.id + 1);
      if (a.qualifier) h.qualifier_count = std::max<std::size_t>(h.qualifier_count, *a.qualifier + 1);
    }
  };
  for (const auto& [s, p] : model.probabilities) visit(s);
  for (const auto& [s, v] : model.values) visit(s);
  return h;
}

inline RewardOracle exact_oracle(const GenerativeModel& model) {
  model.validate();
  RewardOracle oracle(OracleMode::exact, Estimator::exact_match, header_for(model));
  for (const auto& [s, p] : model.probabilities) {
    if (p > 0) oracle.add(s, p, model.values.at(s));
  }
  for (const auto& [s, v] : model.values) oracle.declare(s, v);
  return oracle;
}

/// One record per completed scenario, weight P(s) and reward V(s). Running
/// the empirical machinery on this dataset evaluates population quantities.
inline Dataset to_weighted_dataset(const RewardOracle& oracle) {
  std::vector<TimelineRecord> records;
  for (const auto& s : oracle.completed()) {
    auto r = make_record(s.to_string(), s, oracle.value(s), oracle.probability(s));
    records.push_back(std::move(r));
  }
  return Dataset(oracle.header(), std::move(records));
}

struct AssumptionReport {
  struct Unsupported {
    Scenario scenario;
    Scenario missing_prefix;
  };
  struct NonMonotone {
    Scenario prefix;
    Scenario extension;
    double prefix_value;
    double extension_value;
    double gap;
    std::size_t prefix_count;
    std::size_t extension_count;
  };
  std::vector<Unsupported> support_violations;
  std::vector<NonMonotone> monotonicity_violations;

  bool clean() const { return support_violations.empty() && monotonicity_violations.empty(); }
};

/// Lists completed scenarios with a never-completed sub-scenario, and prefix
/// pairs whose reward decreases along the extension. Nothing here is fatal.
inline AssumptionReport check_assumptions(const RewardOracle& oracle) {
  AssumptionReport report;
  for (const auto& s : oracle.completed()) {
    for (std::size_t i = 1; i < s.length(); ++i) {
      auto p = s.prefix(i);
      if (oracle.probability(p) <= 0) report.support_violations.push_back({s, p});
    }
  }
  for (const auto& s : oracle.support()) {
    if (!oracle.has_value(s)) continue;
    double vs = oracle.value(s);
    for (std::size_t i = 1; i < s.length(); ++i) {
      auto p = s.prefix(i);
      if (!oracle.has_value(p)) continue;
      double vp = oracle.value(p);
      if (vs < vp) {
        const auto* ep = oracle.find(p);
        const auto* es = oracle.find(s);
        report.monotonicity_violations.push_back(
            {p, s, vp, vs, vp - vs, ep ? ep->count : 0, es ? es->count : 0});
      }
    }
  }
  return report;
}

/// Sorted `scenario TAB count TAB mean_reward` table of completed scenarios.
/// In exact mode the count column holds probability mass.
inline void write_oracle_table(std::ostream& out, const RewardOracle& oracle) {
  out << "#scenario\tcount\tmean_reward\n";
  for (const auto& s : oracle.completed()) {
    const auto* e = oracle.find(s);
    double count = oracle.mode() == OracleMode::exact ? e->mass : static_cast<double>(e->count);
    out << s.to_string() << '\t' << text::format_double(count) << '\t'
        << text::format_double(oracle.value(s)) << '\n';
  }
}

inline RewardOracle read_oracle_table(std::istream& in, const DatasetHeader& header) {
  RewardOracle oracle(OracleMode::empirical, Estimator::exact_match, header);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
    auto s = parse_scenario(std::string(f[0]));
    auto count = text::parse_double(f[1]);
    auto mean = text::parse_double(f[2]);
    if (!count || !mean || *count <= 0) throw ParseError("bad count or mean", line_no);
    oracle.add(s, *count, *mean);
  }
  return oracle;
}

}  // namespace coreattr
