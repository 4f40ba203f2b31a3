// Buyers-are-clickers: core valuations with and without the click
// qualifier.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "coreattr/qualifiers.hpp"

using namespace coreattr;

namespace {

void show(const Scenario& s, double v) {
  std::string name = "nu(" + s.to_string() + ")";
  std::printf("  %-20s = %.4f\n", name.c_str(), v);
}

}  // namespace

int main(int argc, char** argv) {
  double share = argc > 1 ? std::strtod(argv[1], nullptr) : 0.4;
  double one_display = argc > 2 ? std::strtod(argv[2], nullptr) : 0.5;
  auto model = buyers_are_clickers_model(share, one_display);

  auto g = generalized_core(exact_oracle(model));
  std::printf("qualified scenarios (type-A share %.2f, one-display probability %.2f)\n", share, one_display);
  for (const auto& [s, v] : g.core.entries()) show(s, v);
  std::printf("  ex-ante value of a first display = %.4f\n", g.ex_ante.at(Scenario{}, 0));

  auto stripped = core_valuation_recursive(exact_oracle(strip_qualifiers(model)));
  std::printf("\nqualifiers removed\n");
  for (const auto& [s, v] : stripped.entries()) show(s, v);
  std::printf("  the second display is worth 0.1 * %.2f although clickers never need it\n", 1 - share);
}
