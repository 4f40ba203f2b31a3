#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coreattr/error.hpp"
#include "coreattr/hashing.hpp"
#include "coreattr/learner.hpp"
#include "coreattr/random.hpp"
#include "coreattr/text.hpp"
#include "coreattr/valuation.hpp"

namespace coreattr {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

/// Cross-entropy of fractional label y against probability sigmoid(z),
/// computed without forming log(p) for extreme z.
inline double cross_entropy_logit(double z, double y) {
  // -y log s(z) - (1-y) log(1-s(z)) = log(1+e^z) - y z
  double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - y * z;
}

inline double dot(const HashedFeatureVector& x, const std::vector<double>& w) {
  double z = 0;
  for (const auto& [i, v] : x.entries) z += w[i] * v;
  return z;
}

/// Full-batch regularized objective over hashed inputs with fractional
/// labels: (1/W) sum_i w_i CE(y_i, s(w.x_i + b)) + lambda/2 |w|^2.
/// The intercept is not regularized.
struct LogisticProblem {
  std::uint32_t bits = 13;
  double lambda = 1e-6;
  std::vector<HashedFeatureVector> inputs;
  std::vector<double> labels;
  std::vector<double> weights;

  double loss(const std::vector<double>& w, double b) const {
    double acc = 0, wsum = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      acc += weights[i] * cross_entropy_logit(dot(inputs[i], w) + b, labels[i]);
      wsum += weights[i];
    }
    double reg = 0;
    for (double v : w) reg += v * v;
    return acc / wsum + 0.5 * lambda * reg;
  }

  /// Gradient w.r.t. (w, b); the intercept component is returned last.
  std::vector<double> gradient(const std::vector<double>& w, double b) const {
    std::vector<double> g(w.size() + 1, 0.0);
    double wsum = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      double r = weights[i] * (sigmoid(dot(inputs[i], w) + b) - labels[i]);
      for (const auto& [j, v] : inputs[i].entries) g[j] += r * v;
      g.back() += r;
      wsum += weights[i];
    }
    for (auto& v : g) v /= wsum;
    for (std::size_t j = 0; j < w.size(); ++j) g[j] += lambda * w[j];
    return g;
  }
};

struct LogisticConfig {
  std::uint32_t hash_bits = 13;
  double lambda = 1e-6;
  std::size_t epochs = 10;
  double step = 0.1;
  std::size_t batch = 256;
  std::uint64_t seed = 0;
  bool warm_start = true;  // reuse weights across successive train() calls
  FeatureRecipe recipe;
};

/// nu(s) = scale * sigmoid(w . phi(s) + b)
class LogisticModel final : public Valuation {
 public:
  LogisticModel() = default;
  LogisticModel(std::uint32_t bits, FeatureRecipe recipe)
      : bits_(bits), recipe_(std::move(recipe)), weights_(std::size_t{1} << bits, 0.0) {}

  double operator()(const TimelineRecord& r, std::size_t len) const override {
    return predict(featurize(r, len, bits_, recipe_));
  }
  std::string kind() const override { return "logistic"; }

  double logit(const HashedFeatureVector& x) const { return dot(x, weights_) + intercept_; }
  double predict(const HashedFeatureVector& x) const { return scale_ * sigmoid(logit(x)); }

  std::uint32_t bits() const noexcept { return bits_; }
  const FeatureRecipe& recipe() const noexcept { return recipe_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::vector<double>& weights() noexcept { return weights_; }
  double intercept() const noexcept { return intercept_; }
  void set_intercept(double b) { intercept_ = b; }
  double scale() const noexcept { return scale_; }
  void set_scale(double s) { scale_ = s; }

  double norm() const {
    double n = 0;
    for (double v : weights_) n += v * v;
    return std::sqrt(n);
  }

  // Metadata stored with the model, informational only.
  double lambda = 0;
  std::uint64_t seed = 0;

 private:
  std::uint32_t bits_ = 13;
  FeatureRecipe recipe_;
  std::vector<double> weights_ = std::vector<double>(std::size_t{1} << 13, 0.0);
  double intercept_ = 0;
  double scale_ = 1;
};

struct TrainingStats {
  std::size_t epochs = 0;
  std::vector<double> epoch_loss;  // mean batch loss seen during each epoch
};

/// Deterministic mini-batch gradient descent on `problem`, in place on
/// `model`. Uses the w = scale * v representation so the L2 shrink stays O(1)
/// per batch.
inline TrainingStats train_logistic(LogisticModel& model, const LogisticProblem& problem, const LogisticConfig& cfg,
                                    std::uint64_t shuffle_seed) {
  if (problem.inputs.empty()) throw TrainingError("empty training set");
  if (cfg.batch == 0) throw ParameterError("batch size must be positive");
  if (!(cfg.step > 0)) throw ParameterError("step size must be positive");
  if (cfg.step * cfg.lambda >= 1) throw ParameterError("step * lambda must be below 1");

  auto& w = model.weights();
  double b = model.intercept();
  double scale = 1.0;
  std::vector<double> v = w;
  std::vector<std::size_t> order(problem.inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(shuffle_seed);
  TrainingStats stats;
  const double shrink = 1.0 - cfg.step * cfg.lambda;

  std::vector<double> residual;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::size_t end = std::min(order.size(), start + cfg.batch);
      residual.assign(end - start, 0.0);
      double wsum = 0, loss = 0;
      for (std::size_t k = start; k < end; ++k) {
        std::size_t i = order[k];
        double z = 0;
        for (const auto& [j, x] : problem.inputs[i].entries) z += v[j] * x;
        z = scale * z + b;
        loss += problem.weights[i] * cross_entropy_logit(z, problem.labels[i]);
        residual[k - start] = problem.weights[i] * (sigmoid(z) - problem.labels[i]);
        wsum += problem.weights[i];
      }
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + " (step " + text::format_double(cfg.step) + ")");
      }
      epoch_loss += loss / wsum;
      ++batches;
      scale *= shrink;
      const double lr = cfg.step / wsum;
      double db = 0;
      for (std::size_t k = start; k < end; ++k) {
        double r = residual[k - start];
        for (const auto& [j, x] : problem.inputs[order[k]].entries) v[j] -= lr * r * x / scale;
        db += r;
      }
      b -= lr * db;
      if (scale < 1e-9) {
        for (auto& x : v) x *= scale;
        scale = 1.0;
      }
    }
    stats.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    ++stats.epochs;
  }
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = scale * v[j];
  for (double x : w) {
    if (!std::isfinite(x)) throw TrainingError("training produced non-finite weights");
  }
  if (!std::isfinite(b)) throw TrainingError("training produced a non-finite intercept");
  model.set_intercept(b);
  return stats;
}

/// Hashed-feature logistic regression on fractional labels.
class LogisticLearner final : public Learner {
 public:
  explicit LogisticLearner(LogisticConfig cfg = {}) : cfg_(std::move(cfg)) {}

  ValuationPtr train(const PrefixDataset& d) override { return train_model(d); }

  std::shared_ptr<LogisticModel> train_model(const PrefixDataset& d) {
    if (d.entries.empty()) throw TrainingError("empty label dataset");
    const auto& inputs = features_for(d);
    LogisticProblem problem;
    problem.bits = cfg_.hash_bits;
    problem.lambda = cfg_.lambda;
    problem.inputs = inputs;  // copy keeps the problem self-contained
    problem.labels.reserve(d.entries.size());
    problem.weights.reserve(d.entries.size());

    double label_max = 0;
    for (const auto& e : d.entries) {
      if (!(e.label >= 0) || !std::isfinite(e.label)) throw TrainingError("labels must be finite and >= 0");
      label_max = std::max(label_max, e.label);
    }
    double scale = std::max(1.0, d.data ? d.data->max_reward() : label_max);
    scale = std::max(scale, label_max);
    for (const auto& e : d.entries) {
      problem.labels.push_back(e.label / scale);
      problem.weights.push_back(e.weight);
    }

    auto model = std::make_shared<LogisticModel>(cfg_.hash_bits, cfg_.recipe);
    if (cfg_.warm_start && previous_ && previous_->bits() == cfg_.hash_bits) {
      *model = *previous_;
    } else {
      double num = 0, den = 0;
      for (std::size_t i = 0; i < problem.labels.size(); ++i) {
        num += problem.weights[i] * problem.labels[i];
        den += problem.weights[i];
      }
      double mean = std::clamp(num / den, 1e-6, 1 - 1e-6);
      model->set_intercept(std::log(mean / (1 - mean)));
    }
    model->set_scale(scale);
    model->lambda = cfg_.lambda;
    model->seed = cfg_.seed;
    last_stats_ = train_logistic(*model, problem, cfg_, mix64(cfg_.seed ^ mix64(calls_++)));
    previous_ = model;
    return model;
  }

  std::string name() const override { return "logistic"; }
  const LogisticConfig& config() const noexcept { return cfg_; }
  const TrainingStats& last_stats() const noexcept { return last_stats_; }

 private:
  const std::vector<HashedFeatureVector>& features_for(const PrefixDataset& d) {
    std::uint64_t key = mix64(reinterpret_cast<std::uintptr_t>(d.data)) ^ mix64(d.entries.size());
    for (const auto& e : d.entries) key = mix64(key ^ (e.record * 131 + e.length));
    if (key != cache_key_ || cache_.size() != d.entries.size()) {
      cache_.clear();
      cache_.reserve(d.entries.size());
      for (const auto& e : d.entries) cache_.push_back(featurize(d.record(e), e.length, cfg_.hash_bits, cfg_.recipe));
      cache_key_ = key;
    }
    return cache_;
  }

  LogisticConfig cfg_;
  std::shared_ptr<const LogisticModel> previous_;
  std::vector<HashedFeatureVector> cache_;
  std::uint64_t cache_key_ = 0;
  std::uint64_t calls_ = 0;
  TrainingStats last_stats_;
};

/// Header line with JSON metadata, then one `index weight` line per nonzero
/// weight.
inline void write_logistic(std::ostream& out, const LogisticModel& m) {
  nlohmann::json meta = {{"kind", "logistic"},
                         {"version", 1},
                         {"hash_bits", m.bits()},
                         {"lambda", m.lambda},
                         {"seed", m.seed},
                         {"intercept", text::format_double(m.intercept())},
                         {"scale", text::format_double(m.scale())},
                         {"recipe", m.recipe().describe()},
                         {"recipe_hash", m.recipe().fingerprint()}};
  nlohmann::json numeric = nlohmann::json::array();
  for (const auto& k : m.recipe().numeric_keys) numeric.push_back(k);
  meta["numeric_keys"] = numeric;
  meta["recipe_flags"] = {m.recipe().position, m.recipe().action, m.recipe().qualifier,
                          m.recipe().previous_action, m.recipe().raw_features};
  out << '#' << meta.dump() << '\n';
  const auto& w = m.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0) out << i << ' ' << text::format_double(w[i]) << '\n';
  }
}

inline LogisticModel read_logistic(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#') throw ParseError("missing model header", 1);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(line.substr(1));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model header: ") + e.what(), 1);
  }
  if (meta.value("kind", "") != "logistic") throw ParseError("not a logistic model", 1);
  FeatureRecipe recipe;
  auto flags = meta.at("recipe_flags");
  recipe.position = flags.at(0);
  recipe.action = flags.at(1);
  recipe.qualifier = flags.at(2);
  recipe.previous_action = flags.at(3);
  recipe.raw_features = flags.at(4);
  for (const auto& k : meta.at("numeric_keys")) recipe.numeric_keys.insert(k.get<std::string>());
  if (recipe.fingerprint() != meta.at("recipe_hash").get<std::uint64_t>()) {
    throw ParseError("feature recipe hash mismatch", 1);
  }
  LogisticModel m(meta.at("hash_bits").get<std::uint32_t>(), recipe);
  m.lambda = meta.value("lambda", 0.0);
  m.seed = meta.value("seed", std::uint64_t{0});
  m.set_intercept(*text::parse_double(meta.at("intercept").get<std::string>()));
  m.set_scale(*text::parse_double(meta.at("scale").get<std::string>()));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = text::split(line, ' ');
    auto idx = f.size() == 2 ? text::parse_int<std::size_t>(f[0]) : std::nullopt;
    auto val = f.size() == 2 ? text::parse_double(f[1]) : std::nullopt;
    if (!idx || !val || *idx >= m.weights().size()) throw ParseError("bad 'index weight' line", line_no);
    m.weights()[*idx] = *val;
  }
  return m;
}

}  // namespace coreattr
