#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "coreattr/error.hpp"

namespace coreattr {

using ActionId = std::uint32_t;
using QualifierId = std::uint32_t;

/// One element of a scenario: a raw action plus, in the qualified setting,
/// the ex-post event observed after it.
struct Action {
  ActionId id = 0;
  std::optional<QualifierId> qualifier;

  Action() = default;
  constexpr Action(ActionId a) : id(a) {}  // NOLINT(google-explicit-constructor)
  constexpr Action(ActionId a, QualifierId q) : id(a), qualifier(q) {}

  friend bool operator==(const Action&, const Action&) = default;
  friend auto operator<=>(const Action& a, const Action& b) {
    if (auto c = a.id <=> b.id; c != 0) return c;
    // absent qualifier sorts first
    return a.qualifier <=> b.qualifier;
  }
};

/// Ordered sequence of actions. Datasets only ever hold nonempty scenarios;
/// the empty scenario exists as the anchor for V(empty) = 0.
class Scenario {
 public:
  Scenario() = default;
  Scenario(std::initializer_list<Action> actions) : actions_(actions) {}
  explicit Scenario(std::vector<Action> actions) : actions_(std::move(actions)) {}

  std::size_t length() const noexcept { return actions_.size(); }
  bool empty() const noexcept { return actions_.empty(); }
  const std::vector<Action>& actions() const noexcept { return actions_; }
  const Action& operator[](std::size_t i) const { return actions_[i]; }
  const Action& back() const { return actions_.back(); }

  /// First `i` elements, 1 <= i <= length().
  Scenario prefix(std::size_t i) const {
    if (i < 1 || i > actions_.size()) {
      throw BoundsError("prefix index " + std::to_string(i) + " outside [1, " +
                        std::to_string(actions_.size()) + "]");
    }
    return Scenario(std::vector<Action>(actions_.begin(), actions_.begin() + i));
  }

  /// Drops the last element; the parent of a length-1 scenario is empty.
  Scenario parent() const {
    if (actions_.empty()) throw BoundsError("empty scenario has no parent");
    return Scenario(std::vector<Action>(actions_.begin(), actions_.end() - 1));
  }

  Scenario extended(Action a) const {
    auto next = actions_;
    next.push_back(a);
    return Scenario(std::move(next));
  }

  /// Prefix order: true iff *this equals the first length() elements of other.
  bool is_prefix_of(const Scenario& other) const noexcept {
    return length() <= other.length() &&
           std::equal(actions_.begin(), actions_.end(), other.actions_.begin());
  }

  /// Same scenario with every qualifier removed.
  Scenario unqualified() const {
    std::vector<Action> out;
    out.reserve(actions_.size());
    for (const auto& a : actions_) out.emplace_back(a.id);
    return Scenario(std::move(out));
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
  friend auto operator<=>(const Scenario& a, const Scenario& b) {
    return std::lexicographical_compare_three_way(a.actions_.begin(), a.actions_.end(),
                                                  b.actions_.begin(), b.actions_.end());
  }

  /// "0:1,1" style rendering: comma separated, qualifier after a colon.
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < actions_.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(actions_[i].id);
      if (actions_[i].qualifier) out += ':' + std::to_string(*actions_[i].qualifier);
    }
    return out;
  }

 private:
  std::vector<Action> actions_;
};

/// [s^1, ..., s^{l(s)}]
inline std::vector<Scenario> enumerate_prefixes(const Scenario& s) {
  std::vector<Scenario> out;
  out.reserve(s.length());
  for (std::size_t i = 1; i <= s.length(); ++i) out.push_back(s.prefix(i));
  return out;
}

/// Inverse of Scenario::to_string. An empty string yields the empty scenario.
inline Scenario parse_scenario(const std::string& text) {
  std::vector<Action> actions;
  if (text.empty()) return Scenario{};
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string item = text.substr(pos, comma - pos);
    auto colon = item.find(':');
    try {
      std::size_t used = 0;
      auto head = item.substr(0, colon);
      unsigned long id = std::stoul(head, &used);
      if (used != head.size()) throw std::invalid_argument(head);
      if (colon == std::string::npos) {
        actions.emplace_back(static_cast<ActionId>(id));
      } else {
        auto tail = item.substr(colon + 1);
        unsigned long q = std::stoul(tail, &used);
        if (used != tail.size()) throw std::invalid_argument(tail);
        actions.emplace_back(static_cast<ActionId>(id), static_cast<QualifierId>(q));
      }
    } catch (const std::logic_error&) {
      throw ParseError("bad scenario element '" + item + "'");
    }
    pos = comma + 1;
  }
  return Scenario(std::move(actions));
}

inline std::ostream& operator<<(std::ostream& os, const Scenario& s) {
  return os << '(' << s.to_string() << ')';
}

struct ScenarioHash {
  std::size_t operator()(const Scenario& s) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    for (const auto& a : s.actions()) {
      mix(a.id);
      mix(a.qualifier ? (static_cast<std::uint64_t>(*a.qualifier) + 1) : 0);
    }
    mix(s.length());
    return static_cast<std::size_t>(h);
  }
};

}  // namespace coreattr

template <>
struct std::hash<coreattr::Scenario> : coreattr::ScenarioHash {};
