// Last touch against core attribution on the two-scenario model: exact
// values, then the fixed point on a sampled dataset.

#include <cstdio>
#include <cstdlib>

#include "coreattr/fixed_point.hpp"
#include "coreattr/metrics.hpp"
#include "coreattr/synthgen.hpp"

using namespace coreattr;

int main(int argc, char** argv) {
  std::size_t timelines = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 10000;
  std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;

  synth::TwoScenarioModel model;
  auto oracle = exact_oracle(model.generative_model());
  auto core = core_valuation_recursive(oracle);
  auto lt = last_touch_valuation(oracle);
  const Scenario a{synth::kDisplayA}, ab{synth::kDisplayA, synth::kDisplayB};
  std::printf("exact model: p = %.4f, V(A) = %.2f, V(A,B) = %.2f\n", model.p, model.c1, model.c2);
  std::printf("  last touch  nu(A) = %.4f  nu(B) = %.4f  f = %.5f\n", lt.at(a), lt.at(ab), mm_objective(lt, oracle));
  std::printf("  core        nu(A) = %.4f  nu(B) = %.4f  f = %.5f\n", core.at(a), core.at(ab),
              mm_objective(core, oracle));

  auto data = synth::sample(model, timelines, seed);
  AveragingLearner learner;
  auto rec = make_record("", ab, 0);
  std::printf("\nfixed point on %zu sampled timelines (seed %llu)\n", timelines,
              static_cast<unsigned long long>(seed));
  std::printf("%5s %12s %10s %10s\n", "iter", "L^A", "nu(A)", "nu(B)");
  auto state = run_fixed_point(data, learner, last_touch_attribution(data), {}, nullptr,
                               [&](const FixedPointState& s) {
                                 if (s.iteration % 5 == 0) {
                                   std::printf("%5zu %12.6f %10.4f %10.4f\n", s.iteration, s.likelihood_train.back(),
                                               (*s.valuation)(rec, 1), (*s.valuation)(rec, 2));
                                 }
                               });
  std::printf("stopped after %zu iterations (%s): nu(A) = %.4f, nu(B) = %.4f\n", state.iteration,
              state.converged ? "converged" : "max_iter", (*state.valuation)(rec, 1), (*state.valuation)(rec, 2));
}
