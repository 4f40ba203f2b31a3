#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "coreattr/dataset.hpp"
#include "coreattr/error.hpp"
#include "coreattr/oracle.hpp"
#include "coreattr/valuation.hpp"

namespace coreattr {

/// Per-timeline split of the reward across positions. Row n belongs to
/// record n of the dataset it was built for.
struct AttributionTable {
  std::vector<std::vector<double>> rows;
  std::vector<double> totals;

  std::size_t size() const noexcept { return rows.size(); }

  /// Largest relative violation of sum(row) == total, or of credit >= 0.
  double efficiency_error() const {
    double worst = 0;
    for (std::size_t n = 0; n < rows.size(); ++n) {
      double sum = 0;
      for (double c : rows[n]) {
        if (c < 0) worst = std::max(worst, -c);
        sum += c;
      }
      double scale = std::max(std::abs(totals[n]), 1e-300);
      if (totals[n] == 0 && sum == 0) continue;
      worst = std::max(worst, std::abs(sum - totals[n]) / scale);
    }
    return worst;
  }
};

struct AttributionDiagnostics {
  std::size_t degenerate_rows = 0;   // sum(nu) == 0 with positive reward, split uniformly
  std::size_t clamped_values = 0;    // negative increments clamped to 0
};

inline AttributionTable last_touch_attribution(const Dataset& data) {
  AttributionTable t;
  t.rows.reserve(data.size());
  t.totals.reserve(data.size());
  for (const auto& r : data.records()) {
    std::vector<double> row(r.length(), 0.0);
    row.back() = r.reward;
    t.rows.push_back(std::move(row));
    t.totals.push_back(r.reward);
  }
  return t;
}

/// Last-touch table over the oracle's completed scenarios, in the record
/// order of to_weighted_dataset(oracle).
inline AttributionTable last_touch_attribution(const RewardOracle& oracle) {
  return last_touch_attribution(to_weighted_dataset(oracle));
}

/// mu(i) = nu(s^i) / sum_j nu(s^j) * reward. A zero denominator with positive
/// reward falls back to a uniform split and bumps the diagnostics counter.
inline std::vector<double> fixed_point_row(const Valuation& nu, const TimelineRecord& r,
                                           AttributionDiagnostics* diag = nullptr) {
  const std::size_t len = r.length();
  std::vector<double> row(len, 0.0);
  if (r.reward == 0) return row;
  std::vector<double> values(len);
  double total = 0;
  for (std::size_t i = 0; i < len; ++i) {
    double v = nu(r, i + 1);
    if (!(v >= 0) || !std::isfinite(v)) {
      throw ValidationError("valuation must be finite and nonnegative, got " + text::format_double(v) +
                            " for " + r.scenario.prefix(i + 1).to_string());
    }
    values[i] = v;
    total += v;
  }
  if (total <= 0) {
    if (diag) ++diag->degenerate_rows;
    std::fill(row.begin(), row.end(), r.reward / static_cast<double>(len));
    return row;
  }
  for (std::size_t i = 0; i < len; ++i) row[i] = values[i] / total * r.reward;
  return row;
}

inline AttributionTable fixed_point_table(const Valuation& nu, const Dataset& data,
                                          AttributionDiagnostics* diag = nullptr) {
  AttributionTable t;
  t.rows.reserve(data.size());
  t.totals.reserve(data.size());
  for (const auto& r : data.records()) {
    t.rows.push_back(fixed_point_row(nu, r, diag));
    t.totals.push_back(r.reward);
  }
  return t;
}

/// nu(s) = E[ mu(l(s), S) | S extends s ], the weighted mean of position-l(s)
/// credit over every record extending s.
inline TabularValuation associated_valuation(const AttributionTable& mu, const Dataset& data,
                                             ValuationFallback fallback = ValuationFallback::error()) {
  if (mu.size() != data.size()) throw ValidationError("attribution table does not match dataset");
  std::unordered_map<Scenario, std::pair<double, double>> acc;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& r = data[n];
    for (std::size_t i = 1; i <= r.length(); ++i) {
      auto& [num, den] = acc[r.scenario.prefix(i)];
      num += r.weight * mu.rows[n][i - 1];
      den += r.weight;
    }
  }
  TabularValuation out(std::move(fallback));
  for (const auto& [s, nd] : acc) out.set(s, nd.first / nd.second);
  return out;
}

inline TabularValuation associated_valuation(const AttributionTable& mu, const RewardOracle& oracle,
                                             ValuationFallback fallback = ValuationFallback::error()) {
  return associated_valuation(mu, to_weighted_dataset(oracle), std::move(fallback));
}

/// nu_LT(s) = V(s) * P(S = s | S extends s) for every supported prefix.
inline TabularValuation last_touch_valuation(const RewardOracle& oracle, double alpha = 0.0) {
  TabularValuation out;
  for (const auto& s : oracle.support()) {
    const auto* e = oracle.find(s);
    if (!e || (e->superset_mass <= 0 && alpha <= 0)) continue;
    double cont = oracle.continuation_probability(s, alpha);
    double v = cont > 0 ? oracle.value(s) * cont : 0.0;
    out.set(s, v);
  }
  return out;
}

/// nu(s) = V(s) - V(s^-), V(empty) = 0. Negative increments (sampling noise)
/// are clamped to zero and counted.
inline TabularValuation core_valuation_recursive(const RewardOracle& oracle,
                                                 AttributionDiagnostics* diag = nullptr) {
  TabularValuation out;
  for (const auto& s : oracle.support()) {
    double inc = oracle.value(s) - oracle.value(s.parent());
    if (inc < 0) {
      if (diag) ++diag->clamped_values;
      inc = 0;
    }
    out.set(s, inc);
  }
  return out;
}

}  // namespace coreattr
