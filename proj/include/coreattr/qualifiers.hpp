#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coreattr/attribution.hpp"
#include "coreattr/dataset.hpp"
#include "coreattr/error.hpp"
#include "coreattr/oracle.hpp"
#include "coreattr/valuation.hpp"

namespace coreattr {

/// How much of the history conditions p(q | s, a).
enum class QualifierContext {
  full,     // the whole qualified prefix s
  compact,  // previous qualified action, position bucket, action
};

enum class QualifierFallback { error, uniform };

/// p(q | s, a): distribution of the ex-post qualifier of action a played
/// after prefix s. Immutable once built.
class QualifierDistribution {
 public:
  struct Key {
    Scenario history;  // full s, or just its last element in compact mode
    std::size_t position = 0;  // bucketed 1-based position of a; 0 in full mode
    ActionId action = 0;
    friend auto operator<=>(const Key&, const Key&) = default;
  };

  QualifierDistribution() = default;
  QualifierDistribution(std::size_t qualifier_count, QualifierContext context, std::size_t position_cap = 3)
      : q_(qualifier_count), context_(context), cap_(position_cap), uniform_(q_, 1.0 / static_cast<double>(q_)) {
    if (q_ == 0) throw ParameterError("qualifier distribution needs at least one qualifier");
    if (cap_ == 0) throw ParameterError("position cap must be positive");
  }

  std::size_t qualifier_count() const noexcept { return q_; }
  QualifierContext context() const noexcept { return context_; }
  void set_fallback(QualifierFallback f) { fallback_ = f; }

  Key key(const Scenario& s, ActionId a) const {
    if (context_ == QualifierContext::full) return {s, 0, a};
    Scenario last = s.empty() ? Scenario{} : Scenario{s.back()};
    return {last, std::min(s.length() + 1, cap_), a};
  }

  bool defined(const Scenario& s, ActionId a) const { return table_.count(key(s, a)) > 0; }

  const std::vector<double>& at(const Scenario& s, ActionId a) const {
    auto it = table_.find(key(s, a));
    if (it != table_.end()) return it->second;
    if (fallback_ == QualifierFallback::uniform) return uniform_;
    throw UndefinedConditionalError("no qualifier distribution for action " + std::to_string(a) + " after (" +
                                    s.to_string() + ")");
  }

  /// Installs a probability vector, which must sum to 1 within 1e-12.
  void set(const Scenario& s, ActionId a, std::vector<double> probs) { set(key(s, a), std::move(probs)); }

  void set(const Key& k, std::vector<double> probs) {
    if (probs.size() != q_) throw ValidationError("qualifier vector has wrong size");
    double total = 0;
    for (double p : probs) {
      if (!(p >= 0) || !std::isfinite(p)) throw ValidationError("qualifier probabilities must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("qualifier probabilities must sum to 1");
    table_[k] = std::move(probs);
  }

  const std::map<Key, std::vector<double>>& table() const noexcept { return table_; }

 private:
  std::size_t q_ = 1;
  QualifierContext context_ = QualifierContext::full;
  std::size_t cap_ = 3;
  QualifierFallback fallback_ = QualifierFallback::error;
  std::map<Key, std::vector<double>> table_;
  std::vector<double> uniform_ = {1.0};
};

namespace detail {

inline std::vector<double> normalized_counts(const std::vector<double>& counts, double alpha) {
  double total = 0;
  for (double c : counts) total += c + alpha;
  std::vector<double> p(counts.size());
  for (std::size_t q = 0; q < counts.size(); ++q) p[q] = (counts[q] + alpha) / total;
  // Absorb rounding so the vector sums to 1 exactly enough for validation.
  double sum = 0;
  for (double x : p) sum += x;
  auto big = std::max_element(p.begin(), p.end());
  *big += 1.0 - sum;
  return p;
}

}  // namespace detail

/// Weighted empirical frequencies of q at each context, add-alpha smoothed.
/// Contexts never observed follow the distribution's fallback policy, which
/// with alpha > 0 and `uniform` gives the Laplace answer 1/|Q|.
inline QualifierDistribution estimate_qualifier_distribution(const Dataset& data,
                                                             QualifierContext context = QualifierContext::compact,
                                                             double alpha = 0.0, std::size_t position_cap = 3) {
  const std::size_t q_count = data.header().qualifier_count;
  if (q_count == 0) throw ValidationError("dataset has no qualifiers");
  if (!(alpha >= 0)) throw ParameterError("smoothing alpha must be nonnegative");
  QualifierDistribution dist(q_count, context, position_cap);
  std::map<QualifierDistribution::Key, std::vector<double>> counts;
  for (const auto& r : data.records()) {
    for (std::size_t i = 0; i < r.length(); ++i) {
      const auto& act = r.scenario[i];
      auto key = dist.key(i == 0 ? Scenario{} : r.scenario.prefix(i), act.id);
      auto& c = counts[key];
      c.resize(q_count, 0.0);
      c[*act.qualifier] += r.weight;
    }
  }
  for (auto& [key, c] : counts) {
    dist.set(key, detail::normalized_counts(c, alpha));
  }
  dist.set_fallback(alpha > 0 ? QualifierFallback::uniform : QualifierFallback::error);
  return dist;
}

/// p(q | s, a) read off an oracle over qualified scenarios: the mass of
/// timelines passing through s + (a, q), normalized over q.
inline QualifierDistribution qualifier_distribution_from_oracle(const RewardOracle& oracle) {
  const std::size_t q_count = oracle.header().qualifier_count;
  if (q_count == 0) throw ValidationError("oracle has no qualifiers");
  QualifierDistribution dist(q_count, QualifierContext::full);
  std::map<std::pair<Scenario, ActionId>, std::vector<double>> mass;
  for (const auto& s : oracle.support()) {
    const auto* e = oracle.find(s);
    if (!e || e->superset_mass <= 0) continue;
    auto& m = mass[{s.parent(), s.back().id}];
    m.resize(q_count, 0.0);
    m[*s.back().qualifier] += e->superset_mass;
  }
  for (auto& [ctx, m] : mass) dist.set(ctx.first, ctx.second, detail::normalized_counts(m, 0.0));
  return dist;
}

/// nu~(s, a) = sum_q nu(s, (a, q)) p(q | s, a).
inline double ex_ante_valuation(const TabularValuation& nu, const QualifierDistribution& qd, const Scenario& s,
                                ActionId a) {
  const auto& p = qd.at(s, a);
  double out = 0;
  for (std::size_t q = 0; q < p.size(); ++q) {
    if (p[q] == 0) continue;
    out += nu.at(s.extended(Action{a, static_cast<QualifierId>(q)})) * p[q];
  }
  return out;
}

/// Ex-ante valuation table keyed by (qualified prefix, raw action).
class ExAnteValuation {
 public:
  double at(const Scenario& s, ActionId a) const {
    auto it = values_.find({s, a});
    if (it == values_.end()) throw UndefinedConditionalError("no ex-ante value for action " + std::to_string(a));
    return it->second;
  }
  void set(const Scenario& s, ActionId a, double v) { values_[{s, a}] = v; }
  const std::map<std::pair<Scenario, ActionId>, double>& entries() const noexcept { return values_; }

 private:
  std::map<std::pair<Scenario, ActionId>, double> values_;
};

struct GeneralizedCore {
  TabularValuation core;  // over qualified scenarios
  ExAnteValuation ex_ante;
  QualifierDistribution qualifiers;
  AttributionDiagnostics diagnostics;
};

/// Core valuation by additivity on qualified scenarios, then ex-ante
/// averaging over the qualifier of the action being bid on.
inline GeneralizedCore generalized_core(const RewardOracle& oracle) {
  GeneralizedCore out;
  out.core = core_valuation_recursive(oracle, &out.diagnostics);
  if (oracle.header().qualifier_count == 0) return out;
  out.qualifiers = qualifier_distribution_from_oracle(oracle);
  for (const auto& [key, p] : out.qualifiers.table()) {
    out.ex_ante.set(key.history, key.action, ex_ante_valuation(out.core, out.qualifiers, key.history, key.action));
  }
  return out;
}

inline constexpr QualifierId kNoClick = 0;
inline constexpr QualifierId kClick = 1;

/// One banner type, qualified by click. Type-A users (share `type_a_share`)
/// click and convert for sure; type-B users never click and convert with
/// probability 0.1 once they have seen two banners. Timeline length is 1
/// with probability `one_display`, else 2, for both types.
inline GenerativeModel buyers_are_clickers_model(double type_a_share = 0.4, double one_display = 0.5) {
  if (!(type_a_share > 0 && type_a_share < 1)) throw ParameterError("type A share must lie in (0, 1)");
  if (!(one_display > 0 && one_display < 1)) throw ParameterError("one-display probability must lie in (0, 1)");
  const Action clicked{0, kClick};
  const Action ignored{0, kNoClick};
  const double wa = type_a_share;
  const double wb = 1 - type_a_share;
  GenerativeModel m;
  m.probabilities = {
      {Scenario{clicked}, wa * one_display},
      {Scenario{ignored}, wb * one_display},
      {Scenario{clicked, clicked}, wa * (1 - one_display)},
      {Scenario{ignored, ignored}, wb * (1 - one_display)},
  };
  m.values = {
      {Scenario{clicked}, 1.0},
      {Scenario{ignored}, 0.0},
      {Scenario{clicked, clicked}, 1.0},
      {Scenario{ignored, ignored}, 0.1},
  };
  return m;
}

/// Same timelines with qualifiers dropped; rewards of merged scenarios are
/// mass-weighted averages.
inline GenerativeModel strip_qualifiers(const GenerativeModel& model) {
  std::map<Scenario, std::pair<double, double>> acc;  // mass, mass * value
  for (const auto& [s, p] : model.probabilities) {
    auto& [mass, reward] = acc[s.unqualified()];
    mass += p;
    reward += p * model.values.at(s);
  }
  GenerativeModel out;
  for (const auto& [s, mr] : acc) {
    out.probabilities.emplace_back(s, mr.first);
    out.values[s] = mr.first > 0 ? mr.second / mr.first : 0.0;
  }
  return out;
}

}  // namespace coreattr
