#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coreattr/attribution.hpp"
#include "coreattr/learner.hpp"
#include "coreattr/metrics.hpp"
#include "coreattr/text.hpp"

namespace coreattr {

struct FixedPointConfig {
  double tol = 1e-8;            // relative change of the training likelihood
  std::size_t max_iter = 100;
  double init_floor = 1e-6;     // applied to the valuation trained on the initial labels
  double valuation_tol = 0.0;   // > 0: also require max |nu_k+1 - nu_k| below this
};

struct FixedPointState {
  std::size_t iteration = 0;
  ValuationPtr valuation;         // nu^(k)
  AttributionTable labels;        // mu used to train nu^(k)
  std::vector<double> likelihood_train;
  std::vector<double> likelihood_test;  // empty without a test split
  AttributionDiagnostics diagnostics;
  bool converged = false;
  double last_valuation_change = 0;
};

/// Called after every iteration (k = 0 is the initial state).
using FixedPointObserver = std::function<void(const FixedPointState&)>;

namespace detail {

inline double max_valuation_change(const Valuation& a, const Valuation& b, const Dataset& data) {
  double worst = 0;
  for (const auto& r : data.records()) {
    for (std::size_t q = 1; q <= r.length(); ++q) worst = std::max(worst, std::abs(a(r, q) - b(r, q)));
  }
  return worst;
}

}  // namespace detail

/// Alternates label generation, model fitting and the fixed-point split
/// mu(i, s) = nu(s^i) / sum_j nu(s^j) * V(s) until the training likelihood
/// settles.
inline FixedPointState run_fixed_point(const Dataset& train, Learner& learner, const AttributionTable& init,
                                       const FixedPointConfig& config = {}, const Dataset* test = nullptr,
                                       const FixedPointObserver& observer = {}) {
  if (init.size() != train.size()) throw ValidationError("initial attribution does not match dataset");
  FixedPointState state;
  state.labels = init;

  auto fit = [&](const AttributionTable& mu, std::size_t k) -> ValuationPtr {
    try {
      return learner.train(build_prefix_dataset(train, mu));
    } catch (const Error& e) {
      throw TrainingError("learner failed at iteration " + std::to_string(k) + ": " + e.what());
    }
  };
  auto record_likelihood = [&](std::size_t k) {
    double l = additivity_likelihood(*state.valuation, train).value;
    if (!std::isfinite(l)) throw TrainingError("non-finite likelihood at iteration " + std::to_string(k));
    state.likelihood_train.push_back(l);
    if (test && !test->empty()) state.likelihood_test.push_back(additivity_likelihood(*state.valuation, *test).value);
  };

  auto nu0 = fit(init, 0);
  state.valuation = config.init_floor > 0 ? std::make_shared<FlooredValuation>(nu0, config.init_floor) : nu0;
  record_likelihood(0);
  if (observer) observer(state);

  for (std::size_t k = 1; k <= config.max_iter; ++k) {
    AttributionTable mu = fixed_point_table(*state.valuation, train, &state.diagnostics);
    auto next = fit(mu, k);
    state.last_valuation_change = detail::max_valuation_change(*next, *state.valuation, train);
    state.labels = std::move(mu);
    state.valuation = std::move(next);
    state.iteration = k;
    double before = state.likelihood_train.back();
    record_likelihood(k);
    if (observer) observer(state);
    double after = state.likelihood_train.back();
    bool settled = std::abs(after - before) < config.tol * std::max(1.0, std::abs(before));
    if (config.valuation_tol > 0) settled = state.last_valuation_change < config.valuation_tol;
    if (settled) {
      state.converged = true;
      break;
    }
  }
  return state;
}

/// One application of the map nu -> nu_P^{mu_nu} via the given learner.
inline ValuationPtr fixed_point_step(const Valuation& nu, const Dataset& data, Learner& learner) {
  return learner.train(build_prefix_dataset(data, fixed_point_table(nu, data)));
}

/// Weighted mean valuation per action id (position i keyed by its action).
inline std::map<ActionId, double> mean_valuation_by_action(const Valuation& nu, const Dataset& data) {
  std::map<ActionId, std::pair<double, double>> acc;
  for (const auto& r : data.records()) {
    for (std::size_t q = 1; q <= r.length(); ++q) {
      auto& [num, den] = acc[r.scenario[q - 1].id];
      num += r.weight * nu(r, q);
      den += r.weight;
    }
  }
  std::map<ActionId, double> out;
  for (const auto& [a, nd] : acc) out[a] = nd.first / nd.second;
  return out;
}

inline nlohmann::json fixed_point_report(const FixedPointState& state, const Dataset& train) {
  nlohmann::json per_action = nlohmann::json::object();
  for (const auto& [a, v] : mean_valuation_by_action(*state.valuation, train)) per_action[std::to_string(a)] = v;
  return {
      {"iterations", state.iteration},
      {"converged", state.converged},
      {"likelihood_train", state.likelihood_train},
      {"likelihood_test", state.likelihood_test},
      {"mean_valuation_by_action", per_action},
      {"diagnostics",
       {{"degenerate_rows", state.diagnostics.degenerate_rows},
        {"clamped_values", state.diagnostics.clamped_values},
        {"last_valuation_change", state.last_valuation_change}}},
  };
}

/// `iteration,likelihood_train,likelihood_test`; the test column is empty
/// when no test split was supplied.
inline void write_trace_csv(std::ostream& out, const FixedPointState& state) {
  out << "iteration,likelihood_train,likelihood_test\n";
  for (std::size_t k = 0; k < state.likelihood_train.size(); ++k) {
    out << k << ',' << text::format_double(state.likelihood_train[k]) << ',';
    if (k < state.likelihood_test.size()) out << text::format_double(state.likelihood_test[k]);
    out << '\n';
  }
}

}  // namespace coreattr
