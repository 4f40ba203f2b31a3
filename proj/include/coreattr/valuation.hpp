#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coreattr/dataset.hpp"
#include "coreattr/error.hpp"
#include "coreattr/scenario.hpp"
#include "coreattr/text.hpp"

namespace coreattr {

/// Value of the last display of a scenario prefix. Learned models need the
/// record for its display features, so evaluation takes the record and the
/// prefix length rather than a bare scenario.
class Valuation {
 public:
  virtual ~Valuation() = default;
  /// nu(s^len) for record r, 1 <= len <= r.length().
  virtual double operator()(const TimelineRecord& r, std::size_t len) const = 0;
  virtual std::string kind() const = 0;
};

using ValuationPtr = std::shared_ptr<const Valuation>;

/// Policy for scenarios missing from a table.
struct ValuationFallback {
  enum class Kind { error, zero, backoff } kind = Kind::error;
  ValuationPtr backoff;  // used when kind == backoff

  static ValuationFallback error() { return {}; }
  static ValuationFallback zero() { return {Kind::zero, nullptr}; }
  static ValuationFallback to(ValuationPtr model) { return {Kind::backoff, std::move(model)}; }
};

/// Scenario-keyed table of valuations.
class TabularValuation final : public Valuation {
 public:
  TabularValuation() = default;
  explicit TabularValuation(ValuationFallback fallback) : fallback_(std::move(fallback)) {}

  double operator()(const TimelineRecord& r, std::size_t len) const override {
    auto it = table_.find(r.scenario.prefix(len));
    if (it != table_.end()) return it->second;
    return fall_back(r, len);
  }

  std::string kind() const override { return "tabular"; }

  double at(const Scenario& s) const {
    auto it = table_.find(s);
    if (it != table_.end()) return it->second;
    if (fallback_.kind == ValuationFallback::Kind::zero) return 0.0;
    if (fallback_.kind == ValuationFallback::Kind::backoff && fallback_.backoff) {
      return (*fallback_.backoff)(make_record("", s, 0.0), s.length());
    }
    throw UndefinedConditionalError("no valuation for scenario " + s.to_string());
  }

  bool contains(const Scenario& s) const { return table_.count(s) > 0; }
  void set(const Scenario& s, double v) { table_[s] = v; }
  std::size_t size() const noexcept { return table_.size(); }
  void set_fallback(ValuationFallback f) { fallback_ = std::move(f); }

  /// (scenario, value) pairs in scenario order.
  std::vector<std::pair<Scenario, double>> entries() const {
    std::vector<std::pair<Scenario, double>> out(table_.begin(), table_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

 private:
  double fall_back(const TimelineRecord& r, std::size_t len) const {
    switch (fallback_.kind) {
      case ValuationFallback::Kind::zero: return 0.0;
      case ValuationFallback::Kind::backoff:
        if (fallback_.backoff) return (*fallback_.backoff)(r, len);
        [[fallthrough]];
      default:
        throw UndefinedConditionalError("no valuation for scenario " + r.scenario.prefix(len).to_string());
    }
  }

  std::unordered_map<Scenario, double> table_;
  ValuationFallback fallback_;
};

/// max(inner, floor)
class FlooredValuation final : public Valuation {
 public:
  FlooredValuation(ValuationPtr inner, double floor) : inner_(std::move(inner)), floor_(floor) {}
  double operator()(const TimelineRecord& r, std::size_t len) const override {
    return std::max((*inner_)(r, len), floor_);
  }
  std::string kind() const override { return inner_->kind(); }
  const ValuationPtr& inner() const noexcept { return inner_; }

 private:
  ValuationPtr inner_;
  double floor_;
};

inline void write_tabular(std::ostream& out, const TabularValuation& v) {
  out << '#' << nlohmann::json{{"kind", "tabular"}, {"version", 1}}.dump() << '\n';
  for (const auto& [s, value] : v.entries()) {
    out << s.to_string() << '\t' << text::format_double(value) << '\n';
  }
}

inline TabularValuation read_tabular(std::istream& in) {
  TabularValuation v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 2) throw ParseError("expected 'scenario TAB value'", line_no);
    auto value = text::parse_double(f[1]);
    if (!value) throw ParseError("bad value", line_no);
    v.set(parse_scenario(std::string(f[0])), *value);
  }
  return v;
}

}  // namespace coreattr
