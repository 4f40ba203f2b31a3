#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coreattr/auction.hpp"
#include "coreattr/criteo.hpp"
#include "coreattr/dataset_io.hpp"
#include "coreattr/fixed_point.hpp"
#include "coreattr/logistic.hpp"
#include "coreattr/metrics.hpp"
#include "coreattr/qualifiers.hpp"
#include "coreattr/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coreattr;

namespace {

/// Process exit status per error category.
enum Exit : int { kOk = 0, kOther = 1, kParse = 2, kValidation = 3, kTraining = 4, kVerification = 5 };

int exit_code_for(std::string_view kind) {
  if (kind == "parse" || kind == "ingestion") return kParse;
  if (kind == "validation" || kind == "schema" || kind == "bounds" || kind == "parameter" ||
      kind == "undefined_conditional") {
    return kValidation;
  }
  if (kind == "training" || kind == "estimation") return kTraining;
  if (kind == "verification") return kVerification;
  return kOther;
}

/// Raised by a subcommand whose own check failed after a clean run.
class CheckFailed : public VerificationError {
 public:
  using VerificationError::VerificationError;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << body;
  if (!out) throw Error("write failed for " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

/// Hash of "blob <size>\0<content>", as computed by `git hash-object`.
std::string git_blob_sha1(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::string head = "blob " + std::to_string(fs::file_size(p));
  head.push_back('\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || !EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) ||
      !EVP_DigestUpdate(ctx.get(), head.data(), head.size())) {
    throw Error("SHA-1 failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0 && !EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()))) {
      throw Error("SHA-1 failed");
    }
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_DigestFinal_ex(ctx.get(), digest, &len)) throw Error("SHA-1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

/// Options shared by every subcommand.
struct Common {
  std::string out;
  std::string config;
  bool json_errors = false;
};

/// Output directory plus the inputs a run read, for the run manifest.
class Run {
 public:
  Run(const CLI::App& sub, const Common& common) : sub_(sub) {
    if (!common.out.empty()) {
      dir_ = common.out;
    } else {
      const char* root = std::getenv("COREATTR_OUT");
      dir_ = fs::path(root && *root ? root : "runs") / sub.get_name();
    }
    fs::create_directories(dir_);
    if (!common.config.empty()) hash_input(common.config);
  }

  const fs::path& dir() const { return dir_; }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

  /// Records an input file in the manifest.
  void hash_input(const std::string& path) {
    if (!fs::is_regular_file(path)) throw Error("cannot open " + path);
    inputs_.push_back({{"path", path}, {"bytes", fs::file_size(path)}, {"sha1", git_blob_sha1(path)}});
  }

  /// Records an input file and returns its content.
  std::string input(const std::string& path) {
    hash_input(path);
    return read_file(path);
  }

  /// Writes run_config.json: resolved options and hashed inputs.
  void finish() const {
    json options = json::object();
    for (const CLI::Option* opt : sub_.get_options()) {
      if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
      const std::string& name = opt->get_lnames()[0];
      if (opt->get_type_size() == 0) {
        options[name] = opt->count() > 0;
      } else if (opt->count() > 0) {
        const auto& res = opt->results();
        options[name] = opt->get_expected_max() > 1 ? json(res) : json(res.empty() ? "" : res.back());
      } else {
        options[name] = opt->get_default_str();
      }
    }
    write_json(dir_ / "run_config.json",
               {{"subcommand", sub_.get_name()}, {"options", options}, {"inputs", inputs_}});
  }

 private:
  const CLI::App& sub_;
  fs::path dir_;
  json inputs_ = json::array();
};

Dataset read_dataset_text(const std::string& body) {
  std::istringstream in(body);
  return read_dataset(in);
}

json dataset_summary(const Dataset& d) {
  std::size_t converted = 0, displays = 0, train = 0, test = 0;
  for (const auto& r : d.records()) {
    converted += r.reward > 0;
    displays += r.length();
    (r.split == Split::test ? test : train) += 1;
  }
  return {{"timelines", d.size()},     {"displays", displays},
          {"converted", converted},    {"total_weight", d.total_weight()},
          {"actions", d.header().alphabet_size}, {"qualifiers", d.header().qualifier_count},
          {"max_length", d.header().max_length}, {"train", train},
          {"test", test}};
}

std::string dataset_text(const Dataset& d) {
  std::ostringstream out;
  write_dataset(out, d);
  return out.str();
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string model = "fig5";
  std::size_t timelines = 10000;
  std::uint64_t seed = 0;
  double p = 1.0 / 3.0, c1 = 0.5, c2 = 0.6;
  double type_a_share = 0.4, one_display = 0.5;
  std::size_t features = 10, vocabulary = 8, max_length = 4;
  std::optional<double> split;
  bool exact = false;
};

void cmd_synth(const SynthOptions& o, Run& run) {
  Dataset data;
  if (o.model == "categorical") {
    if (o.exact) throw ParameterError("--exact does not apply to the categorical corpus");
    synth::CategoricalCorpusConfig cfg;
    cfg.timelines = o.timelines;
    cfg.features = o.features;
    cfg.vocabulary = o.vocabulary;
    cfg.max_length = o.max_length;
    cfg.seed = o.seed;
    data = synth::categorical_corpus(cfg);
  } else {
    GenerativeModel model;
    if (o.model == "fig5") {
      synth::TwoScenarioModel m{o.p, o.c1, o.c2};
      m.validate();
      model = m.generative_model();
    } else if (o.model == "motivating") {
      model = synth::motivating_example_model();
    } else if (o.model == "buyers") {
      model = buyers_are_clickers_model(o.type_a_share, o.one_display);
    } else {
      throw ParameterError("unknown model '" + o.model + "'");
    }
    data = o.exact ? to_weighted_dataset(exact_oracle(model)) : synth::sample(model, o.timelines, o.seed);
  }
  if (o.split) data = criteo::user_split(data, *o.split, o.seed);
  write_file(run / "dataset.tsv", dataset_text(data));
  write_json(run / "summary.json", dataset_summary(data));
}

// ---------------------------------------------------------------- ingest-criteo

struct IngestOptions {
  std::string input, schema;
  std::optional<double> split;
  std::uint64_t seed = 0;
};

void cmd_ingest(const IngestOptions& o, Run& run) {
  std::istringstream schema_text(run.input(o.schema));
  auto schema = criteo::parse_schema(schema_text);
  run.hash_input(o.input);
  auto corpus = criteo::ingest(o.input, schema, o.split, o.seed);
  write_file(run / "dataset.tsv", dataset_text(corpus.dataset));
  write_json(run / "provenance.json", corpus.provenance.to_json());
  write_json(run / "schema.json", criteo::to_json(schema));
  write_json(run / "summary.json", dataset_summary(corpus.dataset));
  if (!corpus.provenance.conserved()) throw CheckFailed("display counts are not conserved");
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string learner = "averaging";
  FixedPointConfig fixed_point;
  LogisticConfig logistic;
  bool no_raw_features = false;
  std::vector<std::string> numeric;
  std::string unseen = "zero";
};

ValuationFallback unseen_fallback(const std::string& unseen) {
  if (unseen == "zero") return ValuationFallback::zero();
  if (unseen == "error") return ValuationFallback::error();
  throw ParameterError("unknown unseen policy '" + unseen + "'");
}

std::unique_ptr<Learner> make_learner(const FitOptions& o) {
  if (o.learner == "averaging") return std::make_unique<AveragingLearner>(unseen_fallback(o.unseen));
  if (o.learner == "logistic") {
    LogisticConfig cfg = o.logistic;
    cfg.seed = o.seed;
    cfg.recipe.raw_features = !o.no_raw_features;
    cfg.recipe.numeric_keys = {o.numeric.begin(), o.numeric.end()};
    return std::make_unique<LogisticLearner>(cfg);
  }
  throw ParameterError("unknown learner '" + o.learner + "'");
}

std::string model_text(const Valuation& nu) {
  std::ostringstream out;
  if (const auto* t = dynamic_cast<const TabularValuation*>(&nu)) {
    write_tabular(out, *t);
  } else if (const auto* m = dynamic_cast<const LogisticModel*>(&nu)) {
    write_logistic(out, *m);
  } else {
    throw ValidationError("cannot serialize a '" + nu.kind() + "' valuation");
  }
  return out.str();
}

json valuation_summary(const Valuation& nu, const Dataset& train, const Dataset& test) {
  json per_action = json::object();
  for (const auto& [a, v] : mean_valuation_by_action(nu, train)) per_action[std::to_string(a)] = v;
  json j = {{"likelihood_train", additivity_likelihood(nu, train).value}, {"mean_valuation_by_action", per_action}};
  if (!test.empty()) j["likelihood_test"] = additivity_likelihood(nu, test).value;
  return j;
}

void cmd_fit(const FitOptions& o, Run& run) {
  Dataset all = read_dataset_text(run.input(o.dataset));
  Dataset train = all.subset(Split::train);
  Dataset test = all.has_split(Split::test) ? all.subset(Split::test) : Dataset(all.header(), {});
  if (train.empty()) throw ValidationError("no training records in " + o.dataset);

  auto init = last_touch_attribution(train);
  auto baseline_learner = make_learner(o);
  ValuationPtr last_touch = baseline_learner->train(build_prefix_dataset(train, init));
  write_file(run / "model_last_touch.model", model_text(*last_touch));

  auto learner = make_learner(o);
  auto state = run_fixed_point(train, *learner, init, o.fixed_point, test.empty() ? nullptr : &test);
  std::ostringstream trace;
  write_trace_csv(trace, state);
  write_file(run / "trace.csv", trace.str());

  json report = {{"learner", learner->name()},
                 {"dataset", dataset_summary(all)},
                 {"fixed_point", fixed_point_report(state, train)},
                 {"last_touch", valuation_summary(*last_touch, train, test)}};
  if (state.iteration > 0) {
    write_file(run / "model_core.model", model_text(*state.valuation));
    report["core"] = valuation_summary(*state.valuation, train, test);
  }
  write_json(run / "report.json", report);
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string dataset;
  std::string fit_dir;
  std::vector<std::string> models;
  std::string metric = "all";
  double delta = kDefaultDelta;
  std::string split = "auto";
  std::string unseen = "zero";
};

ValuationPtr load_model(const std::string& body, const std::string& unseen) {
  std::istringstream in(body);
  std::string first;
  std::getline(in, first);
  if (first.empty() || first[0] != '#') throw ParseError("model file lacks its header line", 1);
  std::string kind = json::parse(first.substr(1)).value("kind", "");
  in.clear();
  in.seekg(0);
  if (kind == "tabular") {
    auto t = std::make_shared<TabularValuation>(read_tabular(in));
    t->set_fallback(unseen_fallback(unseen));
    return t;
  }
  if (kind == "logistic") return std::make_shared<LogisticModel>(read_logistic(in));
  throw ParseError("unknown model kind '" + kind + "'", 1);
}

void cmd_eval(const EvalOptions& o, Run& run) {
  if (o.metric != "all" && o.metric != "map" && o.metric != "likelihood") {
    throw ParameterError("unknown metric '" + o.metric + "'");
  }
  std::vector<std::pair<std::string, std::string>> specs;
  if (!o.fit_dir.empty()) {
    specs.emplace_back("core", (fs::path(o.fit_dir) / "model_core.model").string());
    specs.emplace_back("last_touch", (fs::path(o.fit_dir) / "model_last_touch.model").string());
  }
  for (const auto& m : o.models) {
    auto eq = m.find('=');
    if (eq == std::string::npos || eq == 0) throw ParameterError("--model expects label=path, got '" + m + "'");
    specs.emplace_back(m.substr(0, eq), m.substr(eq + 1));
  }
  if (specs.empty()) throw ParameterError("give --fit-dir or at least one --model");

  Dataset all = read_dataset_text(run.input(o.dataset));
  std::string split = o.split;
  if (split == "auto") split = all.has_split(Split::test) ? "test" : "all";
  Dataset data = split == "all"     ? all
                 : split == "train" ? all.subset(Split::train)
                 : split == "test"  ? all.subset(Split::test)
                                    : throw ParameterError("unknown split '" + split + "'");
  if (data.empty()) throw ValidationError("no records in split '" + split + "'");

  std::vector<double> labels;
  for (const auto& r : data.records()) labels.push_back(r.reward);

  json models = json::object();
  for (const auto& [label, path] : specs) {
    if (!fs::exists(path)) continue;  // a --max-iter 0 fit has no core model
    auto nu = load_model(run.input(path), o.unseen);
    json entry = {{"path", path}, {"kind", nu->kind()}};
    if (o.metric != "map") {
      auto l = additivity_likelihood(*nu, data);
      entry["likelihood"] = l.value;
      entry["likelihood_floored"] = l.floored;
    }
    if (o.metric != "likelihood") {
      std::vector<double> scores;
      std::size_t clamped = 0;
      for (const auto& r : data.records()) {
        auto s = timeline_conversion_probability(*nu, r, o.delta);
        scores.push_back(s.probability);
        clamped += s.clamped;
      }
      entry["map"] = mean_average_precision(scores, labels);
      entry["clamped_displays"] = clamped;
      std::ostringstream pr;
      pr << "recall,precision\n";
      for (const auto& pt : precision_recall_curve(scores, labels)) {
        pr << text::format_double(pt.recall) << ',' << text::format_double(pt.precision) << '\n';
      }
      write_file(run / ("pr_" + label + ".csv"), pr.str());
    }
    models[label] = entry;
  }
  if (models.empty()) throw ValidationError("none of the requested model files exist");
  write_json(run / "eval.json",
             {{"split", split}, {"timelines", data.size()}, {"delta", o.delta}, {"metric", o.metric},
              {"models", models}});
}

// ---------------------------------------------------------------- robustness

struct RobustnessOptions {
  std::string mode = "exact";
  std::vector<double> ps{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  synth::SweepConfig sweep;
};

void cmd_robustness(RobustnessOptions o, Run& run) {
  if (o.mode == "exact") o.sweep.mode = synth::SweepConfig::Mode::exact;
  else if (o.mode == "sampled") o.sweep.mode = synth::SweepConfig::Mode::sampled;
  else throw ParameterError("unknown mode '" + o.mode + "'");
  auto points = synth::robustness_sweep(o.ps, o.sweep);

  std::ostringstream csv;
  csv << "p,core_a,core_b,last_touch_a,last_touch_b,iterations,error\n";
  json rows = json::array();
  double lo[4] = {INFINITY, INFINITY, INFINITY, INFINITY}, hi[4] = {-INFINITY, -INFINITY, -INFINITY, -INFINITY};
  std::size_t errors = 0;
  for (const auto& pt : points) {
    csv << text::format_double(pt.p) << ',' << text::format_double(pt.core_a) << ','
        << text::format_double(pt.core_b) << ',' << text::format_double(pt.last_touch_a) << ','
        << text::format_double(pt.last_touch_b) << ',' << pt.iterations << ',' << pt.error.value_or("") << '\n';
    json row = {{"p", pt.p}, {"iterations", pt.iterations}};
    if (pt.error) {
      ++errors;
      row["error"] = *pt.error;
    } else {
      double v[4] = {pt.core_a, pt.core_b, pt.last_touch_a, pt.last_touch_b};
      for (int i = 0; i < 4; ++i) {
        lo[i] = std::min(lo[i], v[i]);
        hi[i] = std::max(hi[i], v[i]);
      }
      row.update({{"core_a", pt.core_a}, {"core_b", pt.core_b}, {"last_touch_a", pt.last_touch_a},
                  {"last_touch_b", pt.last_touch_b}});
    }
    rows.push_back(row);
  }
  write_file(run / "sweep.csv", csv.str());
  json spread = json::object();
  if (errors < points.size()) {
    spread = {{"core_a", hi[0] - lo[0]}, {"core_b", hi[1] - lo[1]}, {"last_touch_a", hi[2] - lo[2]},
              {"last_touch_b", hi[3] - lo[3]}};
  }
  write_json(run / "report.json", {{"mode", o.mode}, {"points", rows}, {"spread", spread}, {"errors", errors}});
  if (errors) throw TrainingError(std::to_string(errors) + " sweep point(s) failed; see report.json");
}

// ---------------------------------------------------------------- auction-check

struct AuctionOptions {
  std::size_t densities = 100, pairs = 20, points = 1000;
  double step = 1e-3, bid_max = 1.0;
  std::uint64_t seed = 0;
};

void cmd_auction(const AuctionOptions& o, Run& run) {
  Rng rng(o.seed);
  std::vector<auction::CompetitionDensity> family;
  for (std::size_t i = 0; i < o.densities; ++i) family.push_back(auction::random_density(rng, o.bid_max, o.points));
  auto report = auction::verify_myopic_optimality(family, auction::random_value_pairs(rng, o.pairs), o.step, o.bid_max);
  write_json(run / "report.json", report.to_json());
  if (!report.passed()) {
    throw CheckFailed(std::to_string(report.failures) + " density/value pair(s) beat the increment bid");
  }
}

void report_error(const std::string& sub, std::string_view kind, const std::string& message, int code,
                  bool as_json) {
  if (as_json) {
    std::cerr << json{{"error", {{"subcommand", sub}, {"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump()
              << '\n';
  } else {
    std::cerr << "coreattr" << (sub.empty() ? "" : " " + sub) << ": " << kind << " error: " << message << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Core internal attribution for advertising timelines"};
  app.require_subcommand(1);
  Common common;
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.add_option("--out", common.out, "Output directory (default $COREATTR_OUT/<subcommand> or runs/<subcommand>)");
  app.add_flag("--json-errors", common.json_errors, "Print errors as one JSON object on stderr");

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic timeline dataset");
  synth->add_option("--model", so.model, "fig5 | motivating | buyers | categorical")->capture_default_str();
  synth->add_option("--timelines", so.timelines, "Number of sampled timelines")->capture_default_str();
  synth->add_option("--seed", so.seed, "Random seed")->required();
  synth->add_option("--p", so.p, "fig5: probability of the short scenario")->capture_default_str();
  synth->add_option("--c1", so.c1, "fig5: value of (A)")->capture_default_str();
  synth->add_option("--c2", so.c2, "fig5: value of (A,B)")->capture_default_str();
  synth->add_option("--type-a-share", so.type_a_share, "buyers: share of type-A users")->capture_default_str();
  synth->add_option("--one-display", so.one_display, "buyers: probability of a single display")->capture_default_str();
  synth->add_option("--features", so.features, "categorical: features per display")->capture_default_str();
  synth->add_option("--vocabulary", so.vocabulary, "categorical: values per feature")->capture_default_str();
  synth->add_option("--max-length", so.max_length, "categorical: maximum timeline length")->capture_default_str();
  synth->add_option("--split", so.split, "Train fraction for a per-user train/test split");
  synth->add_flag("--exact", so.exact, "Write the exact weighted scenario table instead of samples");

  IngestOptions io;
  auto* ingest = app.add_subcommand("ingest-criteo", "Build timelines from a Criteo-format TSV");
  ingest->add_option("--input", io.input, "TSV or TSV.gz source")->required();
  ingest->add_option("--schema", io.schema, "Column schema file")->required();
  ingest->add_option("--split", io.split, "Train fraction for a per-user train/test split");
  ingest->add_option("--seed", io.seed, "Seed of the user split hash")->capture_default_str();

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "Run the core attribution fixed point");
  fit->add_option("--dataset", fo.dataset, "Dataset file")->required();
  fit->add_option("--seed", fo.seed, "Random seed")->required();
  fit->add_option("--learner", fo.learner, "averaging | logistic")->capture_default_str();
  fit->add_option("--max-iter", fo.fixed_point.max_iter, "Fixed-point iterations")->capture_default_str();
  fit->add_option("--tol", fo.fixed_point.tol, "Relative likelihood change that stops the loop")->capture_default_str();
  fit->add_option("--init-floor", fo.fixed_point.init_floor, "Positivity floor on the initial valuation")
      ->capture_default_str();
  fit->add_option("--valuation-tol", fo.fixed_point.valuation_tol, "Also require max valuation change below this")
      ->capture_default_str();
  fit->add_option("--hash-bits", fo.logistic.hash_bits, "logistic: feature hash bits")->capture_default_str();
  fit->add_option("--lambda", fo.logistic.lambda, "logistic: L2 penalty per sample")->capture_default_str();
  fit->add_option("--epochs", fo.logistic.epochs, "logistic: epochs per fit")->capture_default_str();
  fit->add_option("--step", fo.logistic.step, "logistic: step size")->capture_default_str();
  fit->add_option("--batch", fo.logistic.batch, "logistic: mini-batch size")->capture_default_str();
  fit->add_flag("--no-raw-features", fo.no_raw_features, "logistic: use action-id features only");
  fit->add_option("--numeric", fo.numeric, "logistic: raw feature keys used as numbers");
  fit->add_option("--unseen", fo.unseen, "averaging: unseen prefixes score zero | error")->capture_default_str();

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Score fitted models on a dataset");
  eval->add_option("--dataset", eo.dataset, "Dataset file")->required();
  eval->add_option("--fit-dir", eo.fit_dir, "Directory written by fit");
  eval->add_option("--model", eo.models, "Extra model as label=path");
  eval->add_option("--metric", eo.metric, "map | likelihood | all")->capture_default_str();
  eval->add_option("--delta", eo.delta, "Per-display decay in the conversion score")->capture_default_str();
  eval->add_option("--split", eo.split, "auto | train | test | all")->capture_default_str();
  eval->add_option("--unseen", eo.unseen, "Tabular models on unseen prefixes: zero | error")->capture_default_str();

  RobustnessOptions ro;
  auto* robust = app.add_subcommand("robustness", "Sweep p on the two-scenario model");
  robust->add_option("--mode", ro.mode, "exact | sampled")->capture_default_str();
  robust->add_option("--p", ro.ps, "Values of p")->delimiter(',')->capture_default_str();
  robust->add_option("--timelines", ro.sweep.timelines, "sampled: timelines per p")->capture_default_str();
  robust->add_option("--seed", ro.sweep.seed, "sampled: random seed")->capture_default_str();
  robust->add_option("--c1", ro.sweep.c1, "Value of (A)")->capture_default_str();
  robust->add_option("--c2", ro.sweep.c2, "Value of (A,B)")->capture_default_str();
  robust->add_option("--max-iter", ro.sweep.fixed_point.max_iter, "Fixed-point iterations")->capture_default_str();
  robust->add_option("--valuation-tol", ro.sweep.fixed_point.valuation_tol, "Stop when valuations move less")
      ->capture_default_str();

  AuctionOptions ao;
  auto* auct = app.add_subcommand("auction-check", "Brute-force check of the increment bid");
  auct->add_option("--densities", ao.densities, "Random competition densities")->capture_default_str();
  auct->add_option("--pairs", ao.pairs, "Random (V(s), V(s-)) pairs")->capture_default_str();
  auct->add_option("--points", ao.points, "Support points per density")->capture_default_str();
  auct->add_option("--step", ao.step, "Bid grid step")->capture_default_str();
  auct->add_option("--bid-max", ao.bid_max, "Largest bid on the grid")->capture_default_str();
  auct->add_option("--seed", ao.seed, "Random seed")->capture_default_str();

  for (auto* sub : {synth, ingest, fit, eval, robust, auct}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("", "parse", e.what(), kParse, common.json_errors);
    return kParse;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  std::optional<Run> run;
  try {
    run.emplace(*sub, common);
    if (sub == synth) cmd_synth(so, *run);
    else if (sub == ingest) cmd_ingest(io, *run);
    else if (sub == fit) cmd_fit(fo, *run);
    else if (sub == eval) cmd_eval(eo, *run);
    else if (sub == robust) cmd_robustness(ro, *run);
    else if (sub == auct) cmd_auction(ao, *run);
    run->finish();
  } catch (const Error& e) {
    int code = exit_code_for(e.kind());
    // Failed checks still leave a complete run directory behind.
    if (dynamic_cast<const CheckFailed*>(&e) && run) run->finish();
    report_error(name, e.kind(), e.what(), code, common.json_errors);
    return code;
  } catch (const std::exception& e) {
    report_error(name, "error", e.what(), kOther, common.json_errors);
    return kOther;
  }
  return kOk;
}
