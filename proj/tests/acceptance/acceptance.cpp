// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coreattr/auction.hpp"
#include "coreattr/criteo.hpp"
#include "coreattr/fixed_point.hpp"
#include "coreattr/logistic.hpp"
#include "coreattr/metrics.hpp"
#include "coreattr/qualifiers.hpp"
#include "coreattr/synthgen.hpp"

using namespace coreattr;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

/// Appends a labelled sub-check to the outcome.
void check(Outcome& o, bool ok, const std::string& what) {
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [failed]");
  o.pass = o.pass && ok;
}

double at(const Valuation& nu, const Scenario& s) { return nu(make_record("", s, 0), s.length()); }

const Scenario kA{synth::kDisplayA};
const Scenario kAB{synth::kDisplayA, synth::kDisplayB};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

GenerativeModel random_small_model(Rng& rng) {
  std::size_t actions = 2 + rng.below(3);  // 2..4
  std::size_t length = 2 + rng.below(2);   // 2..3
  return synth::random_monotone_model(rng, actions, length);
}

TabularValuation random_table(Rng& rng, const RewardOracle& oracle) {
  TabularValuation nu;
  for (const auto& s : oracle.support()) nu.set(s, rng.uniform(0.01, 1.0));
  return nu;
}

const TabularValuation& as_table(const ValuationPtr& nu) {
  const auto* t = dynamic_cast<const TabularValuation*>(nu.get());
  if (!t) throw ValidationError("expected a tabular valuation");
  return *t;
}

/// Fixed point from last touch on `data`; returns the first iteration from
/// which nu stays within 0.02 of (0.5, 0.1).
std::size_t band_entry(const Dataset& data, FixedPointState* out = nullptr) {
  AveragingLearner learner;
  std::size_t last_outside = 0;
  auto state = run_fixed_point(data, learner, last_touch_attribution(data), {}, nullptr,
                               [&](const FixedPointState& s) {
                                 if (std::abs(at(*s.valuation, kA) - 0.5) > 0.02 ||
                                     std::abs(at(*s.valuation, kAB) - 0.1) > 0.02) {
                                   last_outside = s.iteration;
                                 }
                               });
  if (out) *out = std::move(state);
  return last_outside + 1;
}

// 1. Fig. 5 model, T = 10,000, averaging learner.
Outcome synthetic_ground_truth() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  FixedPointState state;
  std::size_t entry = band_entry(synth::sample(synth::TwoScenarioModel{}, 10000, 1), &state);
  double secs = seconds_since(t0);
  double a = at(*state.valuation, kA), b = at(*state.valuation, kAB);
  check(o, std::abs(a - 0.5) <= 0.02, "nu(A) = " + fmt("%.4f", a));
  check(o, std::abs(b - 0.1) <= 0.02, "nu(B) = " + fmt("%.4f", b));
  check(o, entry <= 30, "inside the 0.02 band from iteration " + std::to_string(entry));
  check(o, state.converged, "stopping rule met at iteration " + std::to_string(state.iteration));
  check(o, secs < 10, "runtime " + fmt("%.2f", secs) + " s");

  // Context only: the same count without sampling noise and over fresh samples.
  std::size_t exact = band_entry(to_weighted_dataset(exact_oracle(synth::TwoScenarioModel{}.generative_model())));
  std::size_t early = 0;
  for (std::uint64_t seed = 1001; seed <= 1050; ++seed) early += band_entry(synth::sample(synth::TwoScenarioModel{}, 10000, seed)) <= 30;
  o.detail += " (exact oracle enters at iteration " + std::to_string(exact) + "; " + std::to_string(early) +
              "/50 further samples by iteration 30)";
  return o;
}

// 2. Monotone MM ascent on 50 random exact models.
Outcome monotone_ascent() {
  Outcome o;
  Rng rng(2);
  double worst = INFINITY;
  std::size_t steps = 0;
  for (int m = 0; m < 50; ++m) {
    auto data = to_weighted_dataset(exact_oracle(random_small_model(rng)));
    AveragingLearner learner;
    FixedPointConfig cfg;
    cfg.tol = 0;
    cfg.max_iter = 50;
    auto state = run_fixed_point(data, learner, last_touch_attribution(data), cfg);
    for (std::size_t k = 1; k < state.likelihood_train.size(); ++k, ++steps) {
      worst = std::min(worst, state.likelihood_train[k] - state.likelihood_train[k - 1]);
    }
  }
  check(o, worst >= -1e-9, std::to_string(steps) + " steps, smallest change " + fmt("%.3g", worst));
  return o;
}

// 3. Core beats last touch on L^A.
Outcome core_beats_last_touch() {
  Outcome o;
  synth::TwoScenarioModel model;
  auto oracle = exact_oracle(model.generative_model());
  double f_core = mm_objective(core_valuation_recursive(oracle), oracle);
  double f_lt = mm_objective(last_touch_valuation(oracle), oracle);

  // Independent closed form: (A) has mass p and value c1, (A,B) mass 1-p and value c2.
  const double p = model.p, c1 = model.c1, c2 = model.c2;
  auto closed = [&](double va, double vab) {
    return p * (c1 * std::log(va) - va) + (1 - p) * (c2 * std::log(va + vab) - (va + vab));
  };
  double closed_core = closed(c1, c2 - c1);
  double lt_a = p * c1;  // only the short scenario ends at (A)
  double closed_lt = closed(lt_a, c2);
  check(o, std::abs(f_core - closed_core) <= 1e-4 && std::abs(f_core - -0.8865) <= 1e-4,
        "f(core) = " + fmt("%.5f", f_core));
  check(o, std::abs(f_lt - closed_lt) <= 1e-4 && std::abs(f_lt - -0.9716) <= 1e-4, "f(LT) = " + fmt("%.5f", f_lt));

  auto data = synth::sample(model, 10000, 3);
  AveragingLearner learner;
  auto init = last_touch_attribution(data);
  auto lt = learner.train(build_prefix_dataset(data, init));
  auto state = run_fixed_point(data, learner, init);
  double margin = additivity_likelihood(*state.valuation, data).value - additivity_likelihood(*lt, data).value;
  check(o, margin > 0.05, "sampled margin " + fmt("%.4f", margin));
  return o;
}

// 4. Fixed-point certificate on 100 random exact models.
Outcome fixed_point_certificate() {
  Outcome o;
  Rng rng(4);
  double worst_map = 0, worst_limit = 0;
  std::size_t max_iters = 0, unconverged = 0;
  for (int m = 0; m < 100; ++m) {
    auto oracle = exact_oracle(random_small_model(rng));
    auto data = to_weighted_dataset(oracle);
    auto core = core_valuation_recursive(oracle);
    AveragingLearner learner;
    auto mapped = fixed_point_step(core, data, learner);
    FixedPointConfig cfg;
    cfg.tol = 0;
    cfg.max_iter = 200000;
    cfg.valuation_tol = 1e-14;
    auto state = run_fixed_point(data, learner, last_touch_attribution(data), cfg);
    max_iters = std::max(max_iters, state.iteration);
    unconverged += !state.converged;
    for (const auto& s : oracle.support()) {
      worst_map = std::max(worst_map, std::abs(at(*mapped, s) - core.at(s)));
      worst_limit = std::max(worst_limit, std::abs(at(*state.valuation, s) - core.at(s)));
    }
  }
  check(o, worst_map <= 1e-12, "map(core) - core = " + fmt("%.2g", worst_map));
  check(o, worst_limit <= 1e-6, "limit - core = " + fmt("%.2g", worst_limit));
  check(o, unconverged == 0,
        std::to_string(unconverged) + " runs hit max_iter, longest " + std::to_string(max_iters) + " iterations");
  return o;
}

// 5. Distributional robustness across p.
Outcome distributional_robustness() {
  Outcome o;
  std::vector<double> ps{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto points = synth::robustness_sweep(ps);
  double lo[3] = {INFINITY, INFINITY, INFINITY}, hi[3] = {-INFINITY, -INFINITY, -INFINITY};
  for (const auto& pt : points) {
    if (pt.error) {
      check(o, false, "p = " + fmt("%.1f", pt.p) + ": " + *pt.error);
      continue;
    }
    double v[3] = {pt.core_a, pt.core_b, pt.last_touch_a};
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], v[i]);
      hi[i] = std::max(hi[i], v[i]);
    }
  }
  double core_spread = std::max(hi[0] - lo[0], hi[1] - lo[1]);
  check(o, core_spread <= 1e-9, "core spread " + fmt("%.2g", core_spread));
  check(o, hi[2] - lo[2] >= 0.35, "last-touch nu(A) spread " + fmt("%.3f", hi[2] - lo[2]));
  return o;
}

// 6. Myopic optimality of the increment bid.
Outcome myopic_optimality() {
  Outcome o;
  Rng rng(6);
  std::vector<auction::CompetitionDensity> family;
  for (int i = 0; i < 100; ++i) family.push_back(auction::random_density(rng));
  auto report = auction::verify_myopic_optimality(family, auction::random_value_pairs(rng, 20), 1e-3, 1.0);
  check(o, report.passed(),
        std::to_string(report.checks.size()) + " checks, " + std::to_string(report.failures) +
            " beyond slack, max violation " + fmt("%.2g", report.max_violation));
  return o;
}

// 7. Qualifiers on the buyers-are-clickers model.
Outcome qualifiers() {
  Outcome o;
  const Action clicked{0, kClick}, ignored{0, kNoClick};
  double worst = 0, worst_paradox = 0;
  for (double share : {0.2, 0.4, 0.7}) {
    auto model = buyers_are_clickers_model(share, 0.5);
    auto g = generalized_core(exact_oracle(model));
    worst = std::max({worst, std::abs(g.core.at(Scenario{clicked}) - 1.0), std::abs(g.core.at(Scenario{ignored})),
                      std::abs(g.core.at(Scenario{clicked, clicked})),
                      std::abs(g.core.at(Scenario{ignored, ignored}) - 0.1),
                      std::abs(g.ex_ante.at(Scenario{}, 0) - share)});
    auto stripped = core_valuation_recursive(exact_oracle(strip_qualifiers(model)));
    worst_paradox = std::max(worst_paradox, std::abs(stripped.at(Scenario{0, 0}) - 0.1 * (1 - share)));
  }
  check(o, worst <= 1e-9, "qualified core and ex-ante value off by " + fmt("%.2g", worst));
  check(o, worst_paradox <= 1e-9, "unqualified nu(a,a) off 0.1*|B|/(|A|+|B|) by " + fmt("%.2g", worst_paradox));
  return o;
}

// 8. Hashed logistic backend against the averaging backend.
Outcome learner_equivalence() {
  Outcome o;
  auto data = synth::sample(synth::TwoScenarioModel{}, 10000, 8);
  auto init = last_touch_attribution(data);
  AveragingLearner averaging;
  auto ref = run_fixed_point(data, averaging, init);
  LogisticConfig cfg;
  cfg.lambda = 0;
  cfg.seed = 8;
  cfg.recipe.raw_features = false;
  LogisticLearner logistic(cfg);
  auto got = run_fixed_point(data, logistic, init);
  double da = std::abs(at(*got.valuation, kA) - at(*ref.valuation, kA));
  double db = std::abs(at(*got.valuation, kAB) - at(*ref.valuation, kAB));
  check(o, da <= 0.01 && db <= 0.01,
        "|diff| = (" + fmt("%.4f", da) + ", " + fmt("%.4f", db) + ") after " + std::to_string(got.iteration) +
            " logistic iterations");
  return o;
}

// 9a. Bundled fixture against its golden counts.
void golden_fixture(Outcome& o) {
  const std::string dir = COREATTR_FIXTURES;
  std::ifstream ej(dir + "/criteo_sample.expected.json");
  if (!ej) throw Error("missing golden counts");
  auto expected = nlohmann::json::parse(ej);
  auto corpus = criteo::ingest(dir + "/criteo_sample.tsv", criteo::load_schema(dir + "/synthetic.schema"), 0.8, 7);
  const auto& p = corpus.provenance;
  std::map<std::string, std::size_t> got{{"lines", p.parse.lines},
                                         {"rows", p.parse.rows},
                                         {"malformed_rows", p.parse.malformed},
                                         {"displays_in", p.displays_in},
                                         {"displays_unclicked", p.displays_unclicked},
                                         {"displays_kept", p.displays_kept},
                                         {"displays_missing_clicks", p.displays_missing_clicks},
                                         {"displays_too_long", p.displays_too_long},
                                         {"users", p.users},
                                         {"users_kept", p.users_kept},
                                         {"timelines", p.timelines},
                                         {"converted_timelines", p.converted_timelines},
                                         {"timelines_dropped_missing_clicks", p.timelines_dropped_missing_clicks},
                                         {"timelines_dropped_too_long", p.timelines_dropped_too_long}};
  std::size_t mismatches = 0;
  for (const auto& [k, v] : got) mismatches += expected.at(k).get<std::size_t>() != v;
  std::map<std::string, std::size_t> histogram;
  std::map<std::string, std::set<Split>> splits;
  for (const auto& r : corpus.dataset.records()) {
    ++histogram[std::to_string(r.length())];
    splits[r.group].insert(r.split);
  }
  for (const auto& [len, n] : expected.at("length_histogram").items()) mismatches += histogram[len] != n.get<std::size_t>();
  std::size_t mixed = 0;
  for (const auto& [u, s] : splits) mixed += s.size() != 1;
  check(o, mismatches == 0, "fixture: " + std::to_string(mismatches) + " count mismatches");
  check(o, mixed == 0, std::to_string(mixed) + " users on both sides of the split");
  check(o, p.conserved(), "displays conserved");
}

// 9b. Held-out comparison on a 100K-timeline categorical corpus.
void categorical_corpus(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  synth::CategoricalCorpusConfig cc;
  cc.seed = 9;
  auto all = criteo::user_split(synth::categorical_corpus(cc), 0.8, 9);
  Dataset train = all.subset(Split::train), test = all.subset(Split::test);
  LogisticConfig cfg;
  cfg.seed = 9;
  auto init = last_touch_attribution(train);
  LogisticLearner baseline(cfg);
  auto lt = baseline.train(build_prefix_dataset(train, init));
  LogisticLearner learner(cfg);
  FixedPointConfig fp;
  fp.max_iter = 30;
  auto state = run_fixed_point(train, learner, init, fp);

  auto map_of = [&](const Valuation& nu) {
    std::vector<double> scores, labels;
    for (const auto& r : test.records()) {
      scores.push_back(timeline_conversion_probability(nu, r).probability);
      labels.push_back(r.reward);
    }
    return mean_average_precision(scores, labels);
  };
  double l_core = additivity_likelihood(*state.valuation, test).value;
  double l_lt = additivity_likelihood(*lt, test).value;
  double m_core = map_of(*state.valuation), m_lt = map_of(*lt);
  check(o, l_core > l_lt, "held-out L^A core " + fmt("%.4f", l_core) + " vs LT " + fmt("%.4f", l_lt));
  check(o, m_core > m_lt, "held-out MAP core " + fmt("%.4f", m_core) + " vs LT " + fmt("%.4f", m_lt));
  o.detail += " (" + std::to_string(test.size()) + " test timelines, " + fmt("%.1f", seconds_since(t0)) + " s)";
}

// 9c. Optional run on the full dataset.
void full_dataset(Outcome& o) {
  const char* path = std::getenv("COREATTR_CRITEO_TSV");
  if (!path || !*path) {
    o.detail += "; full dataset SKIPPED (set COREATTR_CRITEO_TSV)";
    return;
  }
  const char* schema_env = std::getenv("COREATTR_CRITEO_SCHEMA");
  std::string schema_path = schema_env && *schema_env ? schema_env : COREATTR_CONFIG "/criteo_default.schema";
  auto corpus = criteo::ingest(path, criteo::load_schema(schema_path));
  const auto& p = corpus.provenance;
  auto near = [](double got, double want) { return std::abs(got - want) <= 0.02 * want; };
  check(o, near(p.displays_in, 16e6), "displays " + std::to_string(p.displays_in));
  check(o, near(p.timelines, 8e6), "timelines " + std::to_string(p.timelines));
  check(o, near(p.converted_timelines, 196e3), "converted " + std::to_string(p.converted_timelines));
}

Outcome real_data_pipeline() {
  Outcome o;
  golden_fixture(o);
  categorical_corpus(o);
  full_dataset(o);
  return o;
}

// 10. Surrogate identities and the closed-form maximizer.
Outcome surrogate_oracle() {
  Outcome o;
  Rng rng(10);
  double worst_tight = 0, worst_minor = -INFINITY;
  for (int m = 0; m < 100; ++m) {
    auto oracle = exact_oracle(random_small_model(rng));
    for (int k = 0; k < 10; ++k) {
      auto nu = random_table(rng, oracle), nu_hat = random_table(rng, oracle);
      double f = mm_objective(nu, oracle);
      worst_tight = std::max(worst_tight, std::abs(mm_surrogate(nu, nu, oracle) - f));
      worst_minor = std::max(worst_minor, mm_surrogate(nu, nu_hat, oracle) - f);
    }
  }
  check(o, worst_tight <= 1e-12, "|g(nu|nu) - f(nu)| <= " + fmt("%.2g", worst_tight));
  check(o, worst_minor <= 0, "max g(nu|nu_hat) - f(nu) = " + fmt("%.2g", worst_minor));

  // g is separable over prefixes and concave in each; bisect on a central
  // difference of g itself and compare with one averaging step.
  double worst_arg = 0;
  for (int m = 0; m < 20; ++m) {
    auto oracle = exact_oracle(random_small_model(rng));
    auto data = to_weighted_dataset(oracle);
    auto nu_hat = random_table(rng, oracle);
    AveragingLearner learner;
    auto closed = fixed_point_step(nu_hat, data, learner);
    for (const auto& x : oracle.support()) {
      TabularValuation nu = nu_hat;
      auto slope = [&](double t) {
        double h = 1e-5 * t;
        nu.set(x, t + h);
        double up = mm_surrogate(nu, nu_hat, oracle);
        nu.set(x, t - h);
        double down = mm_surrogate(nu, nu_hat, oracle);
        return (up - down) / (2 * h);
      };
      double lo = 1e-6, hi = 2.0;
      while (hi - lo > 1e-13) {
        double mid = 0.5 * (lo + hi);
        (slope(mid) > 0 ? lo : hi) = mid;
      }
      worst_arg = std::max(worst_arg, std::abs(0.5 * (lo + hi) - as_table(closed).at(x)));
    }
  }
  check(o, worst_arg <= 1e-8, "bisection argmax vs closed form " + fmt("%.2g", worst_arg));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"synthetic ground truth", synthetic_ground_truth},
      {"monotone MM ascent", monotone_ascent},
      {"core beats last touch on L^A", core_beats_last_touch},
      {"fixed-point certificate", fixed_point_certificate},
      {"distributional robustness", distributional_robustness},
      {"myopic optimality", myopic_optimality},
      {"qualifiers", qualifiers},
      {"learner equivalence", learner_equivalence},
      {"real-data pipeline", real_data_pipeline},
      {"surrogate oracle", surrogate_oracle},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed;
}
