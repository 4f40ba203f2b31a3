#pragma once

// Canonical dataset file:
//
//   #{"alphabet_size":2,"max_length":3,"qualifier_count":0}
//   <timeline_id> TAB <reward> TAB <display_1> TAB <display_2> ...
//
// A display is `action[:qualifier][;key=value;key=value...]`. When the header
// carries "extended":true, three columns follow the reward: weight, split
// (train|test|-) and group (empty for none).

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "coreattr/dataset.hpp"
#include "coreattr/text.hpp"

namespace coreattr {

struct DatasetFormat {
  /// Used when the input has no header line (e.g. an empty file).
  std::optional<DatasetHeader> default_header;
};

namespace detail {

inline Split parse_split(std::string_view s, std::size_t line) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "-" || s.empty()) return Split::unassigned;
  throw ParseError("bad split tag '" + std::string(s) + "'", line);
}

inline void check_token(const std::string& s, bool is_key) {
  for (char c : s) {
    if (c == '\t' || c == '\n' || c == '\r' || c == ';' || (is_key && c == '=')) {
      throw ValidationError("feature " + std::string(is_key ? "key" : "value") + " '" + s +
                            "' contains a reserved character");
    }
  }
  if (is_key && s.empty()) throw ValidationError("empty feature key");
}

}  // namespace detail

inline Dataset read_dataset(std::istream& in, const DatasetFormat& format = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<DatasetHeader> header;
  bool extended = false;
  std::vector<TimelineRecord> records;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && !line.empty() && line[0] == '#') {
      try {
        auto j = nlohmann::json::parse(line.substr(1));
        DatasetHeader h;
        h.alphabet_size = j.at("alphabet_size").get<std::size_t>();
        h.qualifier_count = j.value("qualifier_count", std::size_t{0});
        h.max_length = j.at("max_length").get<std::size_t>();
        extended = j.value("extended", false);
        header = h;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad header: ") + e.what(), line_no);
      }
      continue;
    }
    if (line.empty()) continue;
    if (!header) {
      if (!format.default_header) throw ParseError("missing '#' header line", line_no);
      header = format.default_header;
    }

    auto fields = text::split(line, '\t');
    std::size_t first_display = extended ? 5 : 2;
    if (fields.size() < first_display + 1) throw ParseError("too few fields", line_no);
    TimelineRecord r;
    r.timeline_id = std::string(fields[0]);
    auto reward = text::parse_double(fields[1]);
    if (!reward) throw ParseError("bad reward '" + std::string(fields[1]) + "'", line_no);
    r.reward = *reward;
    if (extended) {
      auto w = text::parse_double(fields[2]);
      if (!w) throw ParseError("bad weight '" + std::string(fields[2]) + "'", line_no);
      r.weight = *w;
      r.split = detail::parse_split(fields[3], line_no);
      r.group = std::string(fields[4]);
    }
    std::vector<Action> actions;
    for (std::size_t f = first_display; f < fields.size(); ++f) {
      auto parts = text::split(fields[f], ';');
      auto head = parts[0];
      auto colon = head.find(':');
      auto id = text::parse_int<ActionId>(head.substr(0, colon));
      if (!id) throw ParseError("bad action id in '" + std::string(fields[f]) + "'", line_no);
      if (colon == std::string_view::npos) {
        actions.emplace_back(*id);
      } else {
        auto q = text::parse_int<QualifierId>(head.substr(colon + 1));
        if (!q) throw ParseError("bad qualifier in '" + std::string(fields[f]) + "'", line_no);
        actions.emplace_back(*id, *q);
      }
      FeatureMap fm;
      for (std::size_t k = 1; k < parts.size(); ++k) {
        auto eq = parts[k].find('=');
        if (eq == std::string_view::npos) {
          throw ParseError("feature without '=' in '" + std::string(fields[f]) + "'", line_no);
        }
        fm.push_back({std::string(parts[k].substr(0, eq)), std::string(parts[k].substr(eq + 1))});
      }
      r.display_features.push_back(std::move(fm));
    }
    r.scenario = Scenario(std::move(actions));
    records.push_back(std::move(r));
  }
  if (!header) {
    if (!format.default_header) throw ParseError("empty input without header");
    header = format.default_header;
  }
  return Dataset(*header, std::move(records));
}

inline Dataset load_dataset(const std::string& path, const DatasetFormat& format = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_dataset(in, format);
}

inline void write_dataset(std::ostream& out, const Dataset& d) {
  bool extended = false;
  for (const auto& r : d.records()) {
    if (r.weight != 1.0 || r.split != Split::unassigned || !r.group.empty()) {
      extended = true;
      break;
    }
  }
  nlohmann::json h = {{"alphabet_size", d.header().alphabet_size},
                      {"qualifier_count", d.header().qualifier_count},
                      {"max_length", d.header().max_length}};
  if (extended) h["extended"] = true;
  out << '#' << h.dump() << '\n';
  for (const auto& r : d.records()) {
    for (char c : r.timeline_id) {
      if (c == '\t' || c == '\n') throw ValidationError("timeline_id contains TAB or newline");
    }
    out << r.timeline_id << '\t' << text::format_double(r.reward);
    if (extended) {
      out << '\t' << text::format_double(r.weight) << '\t' << to_string(r.split) << '\t' << r.group;
    }
    for (std::size_t i = 0; i < r.length(); ++i) {
      const auto& a = r.scenario[i];
      out << '\t' << a.id;
      if (a.qualifier) out << ':' << *a.qualifier;
      for (const auto& f : r.display_features[i]) {
        detail::check_token(f.key, true);
        detail::check_token(f.value, false);
        out << ';' << f.key << '=' << f.value;
      }
    }
    out << '\n';
  }
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_dataset(out, d);
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

}  // namespace coreattr
