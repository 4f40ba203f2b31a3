#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coreattr/error.hpp"
#include "coreattr/random.hpp"

namespace coreattr::auction {

/// Discretized law of the highest competing bid: mass[k] at support[k].
struct CompetitionDensity {
  std::vector<double> support;  // increasing
  std::vector<double> mass;

  void validate() const {
    if (support.size() != mass.size() || support.empty()) throw ValidationError("density needs one mass per support point");
    double total = 0;
    for (std::size_t k = 0; k < mass.size(); ++k) {
      if (!(mass[k] >= 0)) throw ValidationError("density masses must be nonnegative");
      if (k > 0 && !(support[k] > support[k - 1])) throw ValidationError("density support must be increasing");
      total += mass[k];
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("density masses must sum to 1");
  }

  double max_mass() const { return *std::max_element(mass.begin(), mass.end()); }

  static CompetitionDensity point_mass(double at) { return {{at}, {1.0}}; }

  /// Uniform mass on the grid step, 2 step, ..., hi.
  static CompetitionDensity uniform(double hi, double step) {
    CompetitionDensity d;
    const auto n = static_cast<std::size_t>(std::llround(hi / step));
    for (std::size_t k = 1; k <= n; ++k) {
      d.support.push_back(static_cast<double>(k) * step);
      d.mass.push_back(1.0 / static_cast<double>(n));
    }
    return d;
  }
};

/// Second-price auction against the highest competing bid t: winning pays t
/// and yields v_win, losing yields v_lose. A tie t == bid counts as a win.
inline double expected_utility(double bid, double v_win, double v_lose, const CompetitionDensity& g) {
  double eu = 0;
  for (std::size_t k = 0; k < g.support.size(); ++k) {
    double t = g.support[k];
    eu += g.mass[k] * (t <= bid ? v_win - t : v_lose);
  }
  return eu;
}

/// Random density on a grid of `points` cells over [0, hi]: a mixture of a
/// few bumps plus an optional atom so heavy tails and spikes both appear.
inline CompetitionDensity random_density(Rng& rng, double hi = 1.0, std::size_t points = 1000) {
  CompetitionDensity d;
  const double step = hi / static_cast<double>(points);
  const std::size_t bumps = 1 + rng.below(4);
  std::vector<double> centers, widths, weights;
  for (std::size_t b = 0; b < bumps; ++b) {
    centers.push_back(rng.uniform(0, hi));
    widths.push_back(rng.uniform(0.005, 0.3) * hi);
    weights.push_back(rng.uniform(0.1, 1.0));
  }
  double total = 0;
  for (std::size_t k = 1; k <= points; ++k) {
    double t = static_cast<double>(k) * step;
    double m = 0;
    for (std::size_t b = 0; b < bumps; ++b) {
      double z = (t - centers[b]) / widths[b];
      m += weights[b] * std::exp(-0.5 * z * z);
    }
    d.support.push_back(t);
    d.mass.push_back(m);
    total += m;
  }
  if (rng.bernoulli(0.3)) {
    std::size_t k = rng.below(points);
    d.mass[k] += total * rng.uniform(0.05, 0.5);
  }
  total = 0;
  for (double m : d.mass) total += m;
  for (double& m : d.mass) m /= total;
  return d;
}

struct DensityCheck {
  std::size_t index = 0;
  double v_win = 0, v_lose = 0;
  double increment_utility = 0;
  double best_grid_utility = 0;
  double best_grid_bid = 0;
  double violation = 0;  // max(0, best grid utility - utility at the increment)
  double tolerance = 0;
  bool passed = true;
};

struct MyopicReport {
  std::vector<DensityCheck> checks;
  double max_violation = 0;
  std::size_t failures = 0;
  bool passed() const noexcept { return failures == 0; }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : checks) {
      rows.push_back({{"profile", c.index},       {"v_win", c.v_win},
                      {"v_lose", c.v_lose},        {"increment_utility", c.increment_utility},
                      {"best_grid_bid", c.best_grid_bid}, {"best_grid_utility", c.best_grid_utility},
                      {"violation", c.violation},  {"tolerance", c.tolerance},
                      {"passed", c.passed}});
    }
    return {{"profiles", rows}, {"max_violation", max_violation}, {"failures", failures}, {"passed", passed()}};
  }
};

/// Compares bidding v_win - v_lose against every bid on a grid of the given
/// step over [0, bid_max]. The allowed slack is 1e-9 plus one grid step
/// times the largest density mass.
inline DensityCheck check_myopic(double v_win, double v_lose, const CompetitionDensity& g, double step,
                                 double bid_max) {
  if (!(v_win >= v_lose && v_lose >= 0)) throw ParameterError("need v_win >= v_lose >= 0");
  if (!(step > 0)) throw ParameterError("bid grid step must be positive");
  g.validate();
  DensityCheck c;
  c.v_win = v_win;
  c.v_lose = v_lose;
  c.increment_utility = expected_utility(v_win - v_lose, v_win, v_lose, g);
  c.best_grid_utility = -INFINITY;
  const auto n = static_cast<std::size_t>(std::llround(bid_max / step));
  for (std::size_t k = 0; k <= n; ++k) {
    double b = static_cast<double>(k) * step;
    double eu = expected_utility(b, v_win, v_lose, g);
    if (eu > c.best_grid_utility) {
      c.best_grid_utility = eu;
      c.best_grid_bid = b;
    }
  }
  c.violation = std::max(0.0, c.best_grid_utility - c.increment_utility);
  c.tolerance = 1e-9 + step * g.max_mass();
  c.passed = c.violation <= c.tolerance;
  return c;
}

inline MyopicReport verify_myopic_optimality(const std::vector<CompetitionDensity>& family,
                                             const std::vector<std::pair<double, double>>& values, double step = 1e-3,
                                             double bid_max = 1.0) {
  MyopicReport report;
  for (std::size_t i = 0; i < family.size(); ++i) {
    for (const auto& [v_win, v_lose] : values) {
      auto c = check_myopic(v_win, v_lose, family[i], step, bid_max);
      c.index = i;
      report.max_violation = std::max(report.max_violation, c.violation);
      report.failures += c.passed ? 0 : 1;
      report.checks.push_back(c);
    }
  }
  return report;
}

/// Random (V(s), V(s^-)) pairs with 0 <= V(s^-) <= V(s) <= 1.
inline std::vector<std::pair<double, double>> random_value_pairs(Rng& rng, std::size_t n) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < n; ++i) {
    double a = rng.uniform();
    double b = rng.uniform();
    out.emplace_back(std::max(a, b), std::min(a, b));
  }
  return out;
}

}  // namespace coreattr::auction
