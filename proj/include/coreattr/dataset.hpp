#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coreattr/error.hpp"
#include "coreattr/scenario.hpp"

namespace coreattr {

/// A raw `key=value` pair attached to a display. Values that parse as numbers
/// are numeric features, anything else is categorical.
struct Feature {
  std::string key;
  std::string value;
  friend bool operator==(const Feature&, const Feature&) = default;
};

using FeatureMap = std::vector<Feature>;

enum class Split { unassigned, train, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "-";
  }
}

/// One observed user journey.
struct TimelineRecord {
  std::string timeline_id;
  Scenario scenario;
  std::vector<FeatureMap> display_features;  // one entry per position
  double reward = 0.0;
  double weight = 1.0;
  Split split = Split::unassigned;
  std::string group;  // user identifier; empty means timeline_id

  std::size_t length() const noexcept { return scenario.length(); }
  const std::string& group_key() const noexcept { return group.empty() ? timeline_id : group; }

  friend bool operator==(const TimelineRecord&, const TimelineRecord&) = default;
};

/// Convenience constructor for records without per-display features.
inline TimelineRecord make_record(std::string id, Scenario s, double reward, double weight = 1.0) {
  TimelineRecord r;
  r.timeline_id = std::move(id);
  r.display_features.assign(s.length(), FeatureMap{});
  r.scenario = std::move(s);
  r.reward = reward;
  r.weight = weight;
  return r;
}

struct DatasetHeader {
  std::size_t alphabet_size = 1;
  std::size_t qualifier_count = 0;  // 0: unqualified
  std::size_t max_length = 1;
  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

/// Validated, immutable collection of timelines over a fixed alphabet.
class Dataset {
 public:
  Dataset() = default;
  Dataset(DatasetHeader header, std::vector<TimelineRecord> records)
      : header_(header), records_(std::move(records)) {
    validate();
  }

  const DatasetHeader& header() const noexcept { return header_; }
  const std::vector<TimelineRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  bool qualified() const noexcept { return header_.qualifier_count > 0; }
  const TimelineRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Records whose split tag matches. `unassigned` records count as train.
  Dataset subset(Split split) const {
    std::vector<TimelineRecord> out;
    for (const auto& r : records_) {
      auto tag = r.split == Split::unassigned ? Split::train : r.split;
      if (tag == split) out.push_back(r);
    }
    Dataset d;
    d.header_ = header_;
    d.records_ = std::move(out);
    return d;
  }

  bool has_split(Split split) const {
    for (const auto& r : records_) {
      auto tag = r.split == Split::unassigned ? Split::train : r.split;
      if (tag == split) return true;
    }
    return false;
  }

  double total_weight() const {
    double w = 0;
    for (const auto& r : records_) w += r.weight;
    return w;
  }

  double max_reward() const {
    double m = 0;
    for (const auto& r : records_) m = std::max(m, r.reward);
    return m;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  void validate() const {
    if (header_.max_length < 1) throw ValidationError("max_length must be >= 1");
    if (header_.alphabet_size < 1) throw ValidationError("alphabet_size must be >= 1");
    std::unordered_map<std::string, Split> group_split;
    for (std::size_t n = 0; n < records_.size(); ++n) {
      const auto& r = records_[n];
      auto where = [&] { return "record " + std::to_string(n) + " ('" + r.timeline_id + "'): "; };
      if (r.scenario.empty()) throw ValidationError(where() + "empty scenario");
      if (r.scenario.length() > header_.max_length) {
        throw ValidationError(where() + "length " + std::to_string(r.length()) +
                              " exceeds max_length " + std::to_string(header_.max_length));
      }
      for (const auto& a : r.scenario.actions()) {
        if (a.id >= header_.alphabet_size) {
          throw ValidationError(where() + "action " + std::to_string(a.id) + " outside alphabet");
        }
        if (qualified()) {
          if (!a.qualifier) throw ValidationError(where() + "missing qualifier");
          if (*a.qualifier >= header_.qualifier_count) {
            throw ValidationError(where() + "qualifier " + std::to_string(*a.qualifier) +
                                  " outside qualifier set");
          }
        } else if (a.qualifier) {
          throw ValidationError(where() + "qualifier in an unqualified dataset");
        }
      }
      if (r.display_features.size() != r.length()) {
        throw ValidationError(where() + "display_features size differs from scenario length");
      }
      if (!std::isfinite(r.reward) || r.reward < 0) throw ValidationError(where() + "reward must be >= 0");
      if (!std::isfinite(r.weight) || r.weight <= 0) throw ValidationError(where() + "weight must be > 0");
      if (r.split != Split::unassigned) {
        auto [it, inserted] = group_split.emplace(r.group_key(), r.split);
        if (!inserted && it->second != r.split) {
          throw ValidationError(where() + "group '" + r.group_key() + "' straddles train/test");
        }
      }
    }
  }

  DatasetHeader header_;
  std::vector<TimelineRecord> records_;
};

}  // namespace coreattr
