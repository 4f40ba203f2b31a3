#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "coreattr/dataset.hpp"
#include "coreattr/error.hpp"
#include "coreattr/hashing.hpp"
#include "coreattr/random.hpp"
#include "coreattr/text.hpp"

namespace coreattr::criteo {

/// Maps source columns to roles. Text form, one `key = value` per line,
/// `#` starts a comment:
///
///   user = uid
///   timestamp = timestamp
///   click = click
///   attribution = attribution
///   conversion_id = conversion_id
///   campaign = campaign                 (optional; groups by user and campaign)
///   time_since_last_click = time_since_last_click   (optional, seconds)
///   clicks_before = click_pos           (optional; missing-click evidence)
///   categorical = cat1,cat2,cat3
///   delimiter = tab | comma | <char>
///   header = true | false
///   columns = a,b,c                     (required when header = false)
///   no_conversion_value = -1
///   max_malformed = 1000
///   max_length = 64
///   tslc_bucket_hours = 1,6,24,72
struct Schema {
  std::string user, timestamp, click, attribution, conversion_id;
  std::string campaign, time_since_last_click, clicks_before;
  std::vector<std::string> categorical;
  char delimiter = '\t';
  bool header = true;
  std::vector<std::string> columns;
  std::string no_conversion_value = "-1";
  std::size_t max_malformed = 1000;
  std::size_t max_length = 64;
  std::vector<double> tslc_bucket_hours{1, 6, 24, 72};

  void validate() const {
    const std::pair<const char*, const std::string*> required[] = {
        {"user", &user}, {"timestamp", &timestamp}, {"click", &click},
        {"attribution", &attribution}, {"conversion_id", &conversion_id}};
    for (const auto& [role, col] : required) {
      if (col->empty()) throw SchemaError(std::string("schema does not map the mandatory role '") + role + "'");
    }
    if (!header && columns.empty()) throw SchemaError("schema without a header line must list its columns");
    if (max_length == 0) throw SchemaError("max_length must be positive");
    for (std::size_t i = 0; i < tslc_bucket_hours.size(); ++i) {
      if (!(tslc_bucket_hours[i] > 0) || (i > 0 && !(tslc_bucket_hours[i] > tslc_bucket_hours[i - 1]))) {
        throw SchemaError("tslc_bucket_hours must be positive and increasing");
      }
    }
  }
};

inline Schema parse_schema(std::istream& in) {
  Schema s;
  std::string line;
  std::size_t lineno = 0;
  auto list = [](std::string_view v) {
    std::vector<std::string> out;
    for (auto part : text::split(v, ',')) {
      auto t = text::trim(part);
      if (!t.empty()) out.emplace_back(t);
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = text::trim(v);
    if (v.empty()) continue;
    auto eq = v.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", lineno);
    std::string key(text::trim(v.substr(0, eq)));
    std::string value(text::trim(v.substr(eq + 1)));
    auto number = [&](const std::string& what) {
      auto n = text::parse_int<std::size_t>(value);
      if (!n) throw ParseError(what + " must be a nonnegative integer", lineno);
      return *n;
    };
    if (key == "user") s.user = value;
    else if (key == "timestamp") s.timestamp = value;
    else if (key == "click") s.click = value;
    else if (key == "attribution") s.attribution = value;
    else if (key == "conversion_id") s.conversion_id = value;
    else if (key == "campaign") s.campaign = value;
    else if (key == "time_since_last_click") s.time_since_last_click = value;
    else if (key == "clicks_before") s.clicks_before = value;
    else if (key == "categorical") s.categorical = list(value);
    else if (key == "columns") s.columns = list(value);
    else if (key == "no_conversion_value") s.no_conversion_value = value;
    else if (key == "max_malformed") s.max_malformed = number(key);
    else if (key == "max_length") s.max_length = number(key);
    else if (key == "header") {
      if (value != "true" && value != "false") throw ParseError("header must be true or false", lineno);
      s.header = value == "true";
    } else if (key == "delimiter") {
      if (value == "tab") s.delimiter = '\t';
      else if (value == "comma") s.delimiter = ',';
      else if (value.size() == 1) s.delimiter = value[0];
      else throw ParseError("delimiter must be tab, comma or a single character", lineno);
    } else if (key == "tslc_bucket_hours") {
      s.tslc_bucket_hours.clear();
      for (const auto& h : list(value)) {
        auto d = text::parse_double(h);
        if (!d) throw ParseError("bad bucket bound '" + h + "'", lineno);
        s.tslc_bucket_hours.push_back(*d);
      }
    } else {
      throw ParseError("unknown schema key '" + key + "'", lineno);
    }
  }
  s.validate();
  return s;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open schema file " + path);
  return parse_schema(in);
}

inline nlohmann::json to_json(const Schema& s) {
  return {{"user", s.user},
          {"timestamp", s.timestamp},
          {"click", s.click},
          {"attribution", s.attribution},
          {"conversion_id", s.conversion_id},
          {"campaign", s.campaign},
          {"time_since_last_click", s.time_since_last_click},
          {"clicks_before", s.clicks_before},
          {"categorical", s.categorical},
          {"delimiter", std::string(1, s.delimiter)},
          {"header", s.header},
          {"columns", s.columns},
          {"no_conversion_value", s.no_conversion_value},
          {"max_malformed", s.max_malformed},
          {"max_length", s.max_length},
          {"tslc_bucket_hours", s.tslc_bucket_hours}};
}

struct RawImpressionRow {
  std::size_t line = 0;  // 1-based source line
  std::string user;
  std::string campaign;
  double timestamp = 0;
  bool click = false;
  bool attributed = false;
  std::string conversion_id;           // empty when no conversion
  std::optional<double> tslc_seconds;  // absent or negative in source -> none
  std::optional<long long> clicks_before;
  std::vector<std::string> categorical;  // in schema order
};

struct ParseStats {
  std::size_t lines = 0;       // data lines seen, header excluded
  std::size_t rows = 0;        // parsed successfully
  std::size_t malformed = 0;
  std::vector<std::string> first_errors;  // up to 10 messages
};

/// Resolves schema roles to column indices for one header.
class RowParser {
 public:
  RowParser(const Schema& schema, const std::vector<std::string>& header) : schema_(schema) {
    for (std::size_t i = 0; i < header.size(); ++i) index_[header[i]] = i;
    width_ = header.size();
    user_ = required(schema.user);
    timestamp_ = required(schema.timestamp);
    click_ = required(schema.click);
    attribution_ = required(schema.attribution);
    conversion_ = required(schema.conversion_id);
    campaign_ = optional_col(schema.campaign);
    tslc_ = optional_col(schema.time_since_last_click);
    clicks_before_ = optional_col(schema.clicks_before);
    for (const auto& c : schema.categorical) categorical_.push_back(required(c));
  }

  /// Throws ParseError on a malformed row.
  RawImpressionRow parse(std::string_view line, std::size_t lineno) const {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fields = text::split(line, schema_.delimiter);
    if (fields.size() != width_) {
      throw ParseError("expected " + std::to_string(width_) + " fields, got " + std::to_string(fields.size()), lineno);
    }
    RawImpressionRow r;
    r.line = lineno;
    r.user = std::string(fields[user_]);
    if (r.user.empty()) throw ParseError("empty user identifier", lineno);
    if (campaign_) r.campaign = std::string(fields[*campaign_]);
    auto ts = text::parse_double(fields[timestamp_]);
    if (!ts) throw ParseError("non-numeric timestamp", lineno);
    r.timestamp = *ts;
    r.click = flag(fields[click_], "click", lineno);
    r.attributed = flag(fields[attribution_], "attribution", lineno);
    auto conv = fields[conversion_];
    if (!conv.empty() && conv != schema_.no_conversion_value) r.conversion_id = std::string(conv);
    if (tslc_ && !fields[*tslc_].empty()) {
      auto t = text::parse_double(fields[*tslc_]);
      if (!t) throw ParseError("non-numeric time since last click", lineno);
      if (*t >= 0) r.tslc_seconds = *t;
    }
    if (clicks_before_ && !fields[*clicks_before_].empty()) {
      auto n = text::parse_int<long long>(fields[*clicks_before_]);
      if (!n) throw ParseError("non-integer clicks-before counter", lineno);
      r.clicks_before = *n;
    }
    for (auto idx : categorical_) r.categorical.emplace_back(fields[idx]);
    return r;
  }

 private:
  std::size_t required(const std::string& col) const {
    auto it = index_.find(col);
    if (it == index_.end()) throw SchemaError("source has no column '" + col + "'");
    return it->second;
  }
  std::optional<std::size_t> optional_col(const std::string& col) const {
    if (col.empty()) return std::nullopt;
    return required(col);
  }
  static bool flag(std::string_view v, const char* what, std::size_t lineno) {
    if (v == "0") return false;
    if (v == "1") return true;
    throw ParseError(std::string(what) + " flag must be 0 or 1, got '" + std::string(v) + "'", lineno);
  }

  const Schema& schema_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
  std::size_t user_ = 0, timestamp_ = 0, click_ = 0, attribution_ = 0, conversion_ = 0;
  std::optional<std::size_t> campaign_, tslc_, clicks_before_;
  std::vector<std::size_t> categorical_;
};

using RowSink = std::function<void(RawImpressionRow&&)>;

/// Streams rows from a line source. Malformed rows are skipped and counted;
/// exceeding `schema.max_malformed` raises IngestionError.
inline ParseStats parse_lines(const std::function<bool(std::string&)>& next_line, const Schema& schema,
                              const RowSink& sink) {
  schema.validate();
  ParseStats stats;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header = schema.columns;
  if (schema.header) {
    if (!next_line(line)) throw SchemaError("source is empty, expected a header line");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    header.clear();
    for (auto f : text::split(line, schema.delimiter)) header.emplace_back(text::trim(f));
  }
  RowParser parser(schema, header);
  while (next_line(line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    ++stats.lines;
    try {
      sink(parser.parse(line, lineno));
      ++stats.rows;
    } catch (const ParseError& e) {
      ++stats.malformed;
      if (stats.first_errors.size() < 10) stats.first_errors.emplace_back(e.what());
      if (stats.malformed > schema.max_malformed) {
        throw IngestionError("more than " + std::to_string(schema.max_malformed) + " malformed rows; last: " +
                             e.what());
      }
    }
  }
  return stats;
}

inline ParseStats parse_stream(std::istream& in, const Schema& schema, const RowSink& sink) {
  return parse_lines([&in](std::string& line) { return static_cast<bool>(std::getline(in, line)); }, schema, sink);
}

/// Plain or gzip-compressed file (zlib reads both transparently).
inline ParseStats parse_tsv(const std::string& path, const Schema& schema, const RowSink& sink) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IngestionError("cannot open " + path);
  struct Closer {
    gzFile f;
    ~Closer() { gzclose(f); }
  } closer{f};
  gzbuffer(f, 1 << 17);
  char buf[1 << 14];
  auto next = [&](std::string& line) {
    line.clear();
    while (gzgets(f, buf, sizeof buf)) {
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        return true;
      }
    }
    int err = 0;
    const char* msg = gzerror(f, &err);
    if (err != Z_OK && err != Z_STREAM_END) throw IngestionError("read error in " + path + ": " + msg);
    return !line.empty();
  };
  return parse_lines(next, schema, sink);
}

struct Provenance {
  ParseStats parse;
  std::size_t displays_in = 0;  // parsed rows
  std::size_t displays_unclicked = 0;
  std::size_t displays_missing_clicks = 0;  // in timelines dropped for missing clicks
  std::size_t displays_too_long = 0;        // in timelines longer than max_length
  std::size_t displays_kept = 0;
  std::size_t users = 0;       // distinct users in the input
  std::size_t users_kept = 0;  // users with at least one output timeline
  std::size_t timelines = 0;
  std::size_t converted_timelines = 0;
  std::size_t timelines_dropped_missing_clicks = 0;
  std::size_t timelines_dropped_too_long = 0;
  std::size_t train_timelines = 0, test_timelines = 0;

  bool conserved() const noexcept {
    return displays_in == displays_kept + displays_unclicked + displays_missing_clicks + displays_too_long;
  }

  nlohmann::json to_json() const {
    return {{"lines", parse.lines},
            {"rows", parse.rows},
            {"malformed_rows", parse.malformed},
            {"malformed_examples", parse.first_errors},
            {"displays_in", displays_in},
            {"displays_kept", displays_kept},
            {"displays_filtered",
             {{"unclicked", displays_unclicked},
              {"missing_clicks", displays_missing_clicks},
              {"too_long", displays_too_long}}},
            {"users", users},
            {"users_kept", users_kept},
            {"timelines", timelines},
            {"converted_timelines", converted_timelines},
            {"timelines_dropped", {{"missing_clicks", timelines_dropped_missing_clicks}, {"too_long", timelines_dropped_too_long}}},
            {"train_timelines", train_timelines},
            {"test_timelines", test_timelines},
            {"conserved", conserved()}};
  }
};

struct PreparedCorpus {
  Dataset dataset;
  Provenance provenance;
};

/// Bucket label for a time since last click, bounds in hours.
inline std::string tslc_bucket(const std::optional<double>& seconds, const std::vector<double>& bounds_hours) {
  if (!seconds) return "none";
  double h = *seconds / 3600.0;
  auto fmt = [](double x) { return text::format_double(x) + "h"; };
  if (bounds_hours.empty()) return "any";
  if (h < bounds_hours.front()) return "lt" + fmt(bounds_hours.front());
  for (std::size_t i = 1; i < bounds_hours.size(); ++i) {
    if (h < bounds_hours[i]) return text::format_double(bounds_hours[i - 1]) + "-" + fmt(bounds_hours[i]);
  }
  return "ge" + fmt(bounds_hours.back());
}

inline std::string clicks_before_bucket(std::size_t n) { return n >= 5 ? "n5+" : "n" + std::to_string(n); }

/// Collects rows, then groups them into timelines of clicked displays.
class TimelineBuilder {
 public:
  explicit TimelineBuilder(Schema schema) : schema_(std::move(schema)) {}

  void add(RawImpressionRow&& r) {
    ++prov_.displays_in;
    users_.insert(r.user);
    if (!r.click) {
      ++prov_.displays_unclicked;
      return;
    }
    auto key = r.user + '\x1f' + r.campaign;
    auto [it, fresh] = group_index_.try_emplace(std::move(key), groups_.size());
    if (fresh) groups_.emplace_back();
    groups_[it->second].push_back(std::move(r));
  }

  /// Per (user, campaign) group: order by timestamp, cut after a converting
  /// display whenever the next display belongs to another conversion, give
  /// each piece reward 1 when any of its displays is attributed, and drop
  /// pieces with evidence of clicks outside the window.
  PreparedCorpus finish(const ParseStats& parse = {}) {
    prov_.parse = parse;
    prov_.users = users_.size();
    std::vector<TimelineRecord> records;
    std::unordered_set<std::string> kept_users;
    std::size_t observed_max = 1;
    for (auto& rows : groups_) {
      std::stable_sort(rows.begin(), rows.end(),
                       [](const RawImpressionRow& a, const RawImpressionRow& b) { return a.timestamp < b.timestamp; });
      std::size_t start = 0, piece = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        bool last = i + 1 == rows.size();
        bool cut = last || (!rows[i].conversion_id.empty() && rows[i + 1].conversion_id != rows[i].conversion_id);
        if (!cut) continue;
        emit(rows, start, i + 1, piece++, records, kept_users, observed_max);
        start = i + 1;
      }
    }
    prov_.users_kept = kept_users.size();
    prov_.timelines = records.size();
    DatasetHeader header{1, 0, std::max<std::size_t>(observed_max, 1)};
    PreparedCorpus out{Dataset(header, std::move(records)), prov_};
    groups_.clear();
    group_index_.clear();
    return out;
  }

 private:
  void emit(const std::vector<RawImpressionRow>& rows, std::size_t begin, std::size_t end, std::size_t piece,
            std::vector<TimelineRecord>& records, std::unordered_set<std::string>& kept_users,
            std::size_t& observed_max) {
    const std::size_t len = end - begin;
    // Clicks earlier in the user's group, before this piece.
    const std::size_t earlier = begin;
    bool missing = false;
    for (std::size_t i = begin; i < end && !missing; ++i) {
      const auto& cb = rows[i].clicks_before;
      if (cb && *cb > static_cast<long long>(i - begin)) missing = true;
    }
    if (missing) {
      ++prov_.timelines_dropped_missing_clicks;
      prov_.displays_missing_clicks += len;
      return;
    }
    if (len > schema_.max_length) {
      ++prov_.timelines_dropped_too_long;
      prov_.displays_too_long += len;
      return;
    }
    TimelineRecord r;
    const auto& first = rows[begin];
    r.timeline_id = first.user + (first.campaign.empty() ? "" : "/" + first.campaign) + "/" + std::to_string(piece);
    r.group = first.user;
    std::vector<Action> actions(len, Action{0});
    r.scenario = Scenario(std::move(actions));
    bool attributed = false;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& row = rows[i];
      attributed = attributed || row.attributed;
      FeatureMap fm;
      for (std::size_t c = 0; c < schema_.categorical.size(); ++c) fm.push_back({schema_.categorical[c], row.categorical[c]});
      fm.push_back({"clicks_before", clicks_before_bucket(earlier + (i - begin))});
      fm.push_back({"tslc", tslc_bucket(row.tslc_seconds, schema_.tslc_bucket_hours)});
      r.display_features.push_back(std::move(fm));
    }
    r.reward = attributed ? 1.0 : 0.0;
    prov_.displays_kept += len;
    prov_.converted_timelines += attributed ? 1 : 0;
    observed_max = std::max(observed_max, len);
    kept_users.insert(first.user);
    records.push_back(std::move(r));
  }

  Schema schema_;
  Provenance prov_;
  std::unordered_set<std::string> users_;
  std::unordered_map<std::string, std::size_t> group_index_;
  std::vector<std::vector<RawImpressionRow>> groups_;
};

inline PreparedCorpus build_timelines(std::vector<RawImpressionRow> rows, const Schema& schema,
                                      const ParseStats& parse = {}) {
  TimelineBuilder b(schema);
  for (auto& r : rows) b.add(std::move(r));
  return b.finish(parse);
}

/// Position of a user in [0, 1), a deterministic function of seed and id.
inline double user_unit(const std::string& user, std::uint64_t seed) {
  return static_cast<double>(mix64(fnv1a64(user) ^ mix64(seed)) >> 11) * 0x1.0p-53;
}

/// Tags each record train or test by hashing its group (user) key.
inline Dataset user_split(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw ParameterError("split fraction must lie strictly between 0 and 1");
  std::vector<TimelineRecord> records = data.records();
  for (auto& r : records) r.split = user_unit(r.group_key(), seed) < fraction ? Split::train : Split::test;
  return Dataset(data.header(), std::move(records));
}

inline void count_split(const Dataset& data, Provenance& prov) {
  prov.train_timelines = prov.test_timelines = 0;
  for (const auto& r : data.records()) {
    if (r.split == Split::test) ++prov.test_timelines;
    else ++prov.train_timelines;
  }
}

/// Parse, build and optionally split a source file.
inline PreparedCorpus ingest(const std::string& path, const Schema& schema, std::optional<double> split_fraction = {},
                             std::uint64_t seed = 0) {
  TimelineBuilder builder(schema);
  auto stats = parse_tsv(path, schema, [&](RawImpressionRow&& r) { builder.add(std::move(r)); });
  auto corpus = builder.finish(stats);
  if (split_fraction) corpus.dataset = user_split(corpus.dataset, *split_fraction, seed);
  count_split(corpus.dataset, corpus.provenance);
  return corpus;
}

}  // namespace coreattr::criteo
