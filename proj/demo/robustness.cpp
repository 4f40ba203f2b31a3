// Valuations of the two display types as the scenario mix p changes while
// the reward function stays fixed.

#include <cstdio>

#include "coreattr/synthgen.hpp"

using namespace coreattr;

int main() {
  std::vector<double> ps;
  for (int k = 1; k <= 9; ++k) ps.push_back(k / 10.0);
  auto points = synth::robustness_sweep(ps);
  std::printf("%5s %10s %10s %10s %10s %6s\n", "p", "core A", "core B", "LT A", "LT B", "iters");
  for (const auto& pt : points) {
    if (pt.error) {
      std::printf("%5.2f  error: %s\n", pt.p, pt.error->c_str());
      continue;
    }
    std::printf("%5.2f %10.6f %10.6f %10.6f %10.6f %6zu\n", pt.p, pt.core_a, pt.core_b, pt.last_touch_a,
                pt.last_touch_b, pt.iterations);
  }
}
