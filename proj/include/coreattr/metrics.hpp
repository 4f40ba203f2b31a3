#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "coreattr/dataset.hpp"
#include "coreattr/error.hpp"
#include "coreattr/oracle.hpp"
#include "coreattr/valuation.hpp"

namespace coreattr {

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kDefaultDelta = 0.95;

struct LikelihoodReport {
  double value = 0;
  std::vector<double> terms;  // per timeline, unweighted
  std::size_t floored = 0;    // positive-label timelines with sum(nu) below the floor
};

/// L^A(nu) = (1/T) sum_t [ y_t ln(sum_q nu(s_t^q)) - sum_q nu(s_t^q) ], with
/// record weights in place of 1/T when present.
inline LikelihoodReport additivity_likelihood(const Valuation& nu, const Dataset& data,
                                              double floor = kLogFloor) {
  LikelihoodReport rep;
  rep.terms.reserve(data.size());
  double acc = 0, wsum = 0;
  for (const auto& r : data.records()) {
    double total = 0;
    for (std::size_t q = 1; q <= r.length(); ++q) total += nu(r, q);
    double term = -total;
    if (r.reward > 0) {
      if (total < floor) ++rep.floored;
      term += r.reward * std::log(std::max(total, floor));
    }
    rep.terms.push_back(term);
    acc += r.weight * term;
    wsum += r.weight;
  }
  rep.value = wsum > 0 ? acc / wsum : 0.0;
  if (!std::isfinite(rep.value)) throw MetricError("additivity likelihood is not finite");
  return rep;
}

namespace detail {

inline double table_value(const TabularValuation& nu, const Scenario& s) {
  double v = nu.at(s);
  if (!(v > 0)) throw MetricError("objective requires nu > 0, got nu" + s.to_string() + " = " + std::to_string(v));
  return v;
}

}  // namespace detail

/// f(nu) = E_P[ V(S) ln(sum_q nu(S^q)) - sum_q nu(S^q) ] on an oracle.
inline double mm_objective(const TabularValuation& nu, const RewardOracle& oracle) {
  double f = 0;
  for (const auto& s : oracle.completed()) {
    double total = 0;
    for (std::size_t q = 1; q <= s.length(); ++q) total += detail::table_value(nu, s.prefix(q));
    f += oracle.probability(s) * (oracle.value(s) * std::log(total) - total);
  }
  return f;
}

/// Minorizer g(nu | nu_hat) of f, tight at nu == nu_hat.
inline double mm_surrogate(const TabularValuation& nu, const TabularValuation& nu_hat,
                           const RewardOracle& oracle) {
  double g = 0;
  for (const auto& s : oracle.completed()) {
    const std::size_t len = s.length();
    std::vector<double> cur(len), ref(len);
    double ref_total = 0;
    for (std::size_t q = 0; q < len; ++q) {
      auto p = s.prefix(q + 1);
      cur[q] = detail::table_value(nu, p);
      ref[q] = detail::table_value(nu_hat, p);
      ref_total += ref[q];
    }
    double v = oracle.value(s);
    double inner = 0;
    for (std::size_t j = 0; j < len; ++j) {
      inner += ref[j] * v / ref_total * std::log(cur[j] / ref[j] * ref_total) - cur[j];
    }
    g += oracle.probability(s) * inner;
  }
  return g;
}

struct ConversionScore {
  double probability;
  std::size_t clamped;  // displays whose valuation was clamped into [0,1]
};

/// (1 - prod_q (1 - nu(s^q))) * delta^l(s)
inline ConversionScore timeline_conversion_probability(const Valuation& nu, const TimelineRecord& r,
                                                       double delta = kDefaultDelta) {
  if (!(delta > 0 && delta <= 1)) throw ParameterError("delta must lie in (0, 1]");
  double keep = 1.0;
  std::size_t clamped = 0;
  for (std::size_t q = 1; q <= r.length(); ++q) {
    double v = nu(r, q);
    if (v < 0 || v > 1) {
      ++clamped;
      v = std::clamp(v, 0.0, 1.0);
    }
    keep *= 1.0 - v;
  }
  return {(1.0 - keep) * std::pow(delta, static_cast<double>(r.length())), clamped};
}

/// Ranking order used by the precision-recall metrics: score descending,
/// ties kept in input order.
inline std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// Average precision of the score ranking against binary labels (label > 0
/// is positive).
inline double mean_average_precision(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in size");
  auto order = rank_by_score(scores);
  double hits = 0, sum = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] > 0) {
      hits += 1;
      sum += hits / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw MetricError("average precision undefined without positive labels");
  return sum / hits;
}

struct PrPoint {
  double recall;
  double precision;
};

/// One point per rank position.
inline std::vector<PrPoint> precision_recall_curve(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in size");
  double positives = 0;
  for (double l : labels) positives += l > 0 ? 1 : 0;
  if (positives == 0) throw MetricError("precision-recall undefined without positive labels");
  auto order = rank_by_score(scores);
  std::vector<PrPoint> out;
  out.reserve(order.size());
  double hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] > 0) hits += 1;
    out.push_back({hits / positives, hits / static_cast<double>(k + 1)});
  }
  return out;
}

}  // namespace coreattr
