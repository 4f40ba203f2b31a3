#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coreattr/dataset.hpp"
#include "coreattr/error.hpp"
#include "coreattr/text.hpp"

namespace coreattr {

/// 64-bit FNV-1a. Test vectors: "" -> 0xcbf29ce484222325,
/// "a" -> 0xaf63dc4c8601ec8c, "foobar" -> 0x85944171f73967e8.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Sparse vector in [0, 2^bits), indices sorted and unique.
struct HashedFeatureVector {
  std::uint32_t bits = 13;
  std::vector<std::pair<std::uint32_t, double>> entries;

  std::uint32_t dimension() const noexcept { return 1u << bits; }
};

/// What goes into a display's feature vector besides its raw features.
struct FeatureRecipe {
  bool position = true;         // "pos=<i>"
  bool action = true;           // "action=<id>"
  bool qualifier = true;        // "qual=<id>", qualified data only
  bool previous_action = true;  // "prev=<id[:q]>" or "prev=none"
  bool raw_features = true;
  std::set<std::string> numeric_keys;  // raw keys whose value is used as is; others are categorical

  /// Stable text description, hashed into model metadata.
  std::string describe() const {
    std::string d = "pos=" + std::to_string(position) + ";action=" + std::to_string(action) +
                    ";qual=" + std::to_string(qualifier) + ";prev=" + std::to_string(previous_action) +
                    ";raw=" + std::to_string(raw_features) + ";numeric=";
    for (const auto& k : numeric_keys) d += k + ",";
    return d;
  }
  std::uint64_t fingerprint() const { return fnv1a64(describe()); }
};

/// Hashes display `position` (1-based) of the record. Collisions add up.
inline HashedFeatureVector featurize(const TimelineRecord& r, std::size_t position, std::uint32_t bits = 13,
                                     const FeatureRecipe& recipe = {}) {
  if (position < 1 || position > r.length()) throw BoundsError("featurize position out of range");
  if (bits < 1 || bits > 30) throw ParameterError("hash bits must lie in [1, 30]");
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::vector<std::pair<std::uint32_t, double>> raw;
  auto put = [&](const std::string& key, double value) {
    raw.emplace_back(static_cast<std::uint32_t>(fnv1a64(key) & mask), value);
  };
  const auto& a = r.scenario[position - 1];
  if (recipe.position) put("pos=" + std::to_string(position), 1.0);
  if (recipe.action) put("action=" + std::to_string(a.id), 1.0);
  if (recipe.qualifier && a.qualifier) put("qual=" + std::to_string(*a.qualifier), 1.0);
  if (recipe.previous_action) {
    if (position == 1) {
      put("prev=none", 1.0);
    } else {
      const auto& p = r.scenario[position - 2];
      put("prev=" + std::to_string(p.id) + (p.qualifier ? ":" + std::to_string(*p.qualifier) : std::string()), 1.0);
    }
  }
  if (recipe.raw_features) {
    for (const auto& f : r.display_features[position - 1]) {
      if (recipe.numeric_keys.count(f.key)) {
        auto v = text::parse_double(f.value);
        if (!v) throw ValidationError("numeric feature '" + f.key + "' has value '" + f.value + "'");
        put(f.key, *v);
      } else {
        put(f.key + "=" + f.value, 1.0);
      }
    }
  }
  std::sort(raw.begin(), raw.end());
  HashedFeatureVector out;
  out.bits = bits;
  for (const auto& [i, v] : raw) {
    if (!out.entries.empty() && out.entries.back().first == i) {
      out.entries.back().second += v;
    } else {
      out.entries.emplace_back(i, v);
    }
  }
  return out;
}

}  // namespace coreattr
