#include "stream/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "stream/common/errors.hpp"

namespace stream::train {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<layer::ParamRef> refs_of(layer::EventModel& model) {
  std::vector<layer::ParamRef> refs;
  model.for_each_param([&](const layer::ParamRef& r) { refs.push_back(r); });
  return refs;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string dump_logits(const layer::Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and nonnegative");
  if (batch == 0) throw ConfigError("batch size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
  if (!(grad_clip >= 0.0)) throw ConfigError("gradient clip must be nonnegative (0 disables)");
  if (!(cutmix_prob >= 0.0 && cutmix_prob <= 1.0)) throw ConfigError("cutmix probability outside [0, 1]");
}

double TrainResult::final_val_accuracy() const {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->split == "val") return it->accuracy;
  }
  return 0.0;
}

layer::ModelConfig toy_model_config(layer::AblationRow variant) {
  layer::ModelConfig c;
  c.n = 16;
  c.m = 4;
  c.layers = 2;
  c.subsample_schedule = {{1, 8, 2}};
  c.variant = variant;
  c.classes = 2;
  c.typical_gap = 1e-3;  // seconds between events
  return c;
}

EpochMetrics evaluate(const layer::EventModel& model, const std::vector<Sample>& samples,
                      const layer::StackOptions& options) {
  EpochMetrics m;
  if (samples.empty()) return m;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const layer::Vector logits = layer::event_forward(model, geometry::tokenize_events(s.stream), options);
    const auto loss = cross_entropy(logits, s.label);
    m.loss += loss.loss;
    Eigen::Index best;
    logits.maxCoeff(&best);
    correct += static_cast<std::size_t>(best) == s.label;
  }
  m.loss /= static_cast<double>(samples.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return m;
}

TrainResult train_toy(const layer::ModelConfig& model_config, const TrainConfig& config, const Dataset& data,
                      const TrainHooks& hooks) {
  config.validate();
  model_config.validate();
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (model_config.classes != data.classes) throw ConfigError("model and dataset disagree on the class count");

  const CounterRng root(config.seed);
  CounterRng init_rng = root.fork(0);
  TrainResult result;
  result.model = layer::EventModel::init(model_config, data.width, data.height, init_rng);
  auto grads = layer::EventModel::zeros_like(result.model);
  const auto params = refs_of(result.model);
  const auto grad_refs = refs_of(grads);
  AdamState adam;
  const layer::StackOptions options{hooks.pool};

  std::vector<std::size_t> order(data.train.size());
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle_rng = root.fork(1000 + epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    EpochMetrics train_m;
    train_m.epoch = epoch;
    train_m.split = "train";
    std::size_t correct = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + config.batch);
      for (const auto& g : grad_refs) std::fill(g.data, g.data + g.size(), 0.0);
      for (std::size_t i = b0; i < b1; ++i) {
        const Sample& sample = data.train[order[i]];
        CounterRng aug_rng = root.fork((epoch << 32) + i + 1);
        geometry::EventStream stream = sample.stream;
        layer::Vector target = layer::Vector::Zero(static_cast<Eigen::Index>(data.classes));
        target[static_cast<Eigen::Index>(sample.label)] = 1.0;
        if (config.augment) stream = geometry::augment_events(stream, aug_rng, config.augmentation);
        if (config.cutmix_prob > 0.0 && aug_rng.bernoulli(config.cutmix_prob)) {
          const Sample& other = data.train[aug_rng.below(data.train.size())];
          const auto mixed = geometry::event_cutmix(stream, other.stream, aug_rng);
          if (mixed.stream.size() >= model_config.total_subsample()) {
            stream = mixed.stream;
            target *= 1.0 - mixed.lambda;
            target[static_cast<Eigen::Index>(other.label)] += mixed.lambda;
          }
        }
        const auto tokens = geometry::tokenize_events(stream);
        layer::EventCache cache;
        layer::Vector logits;
        try {
          logits = layer::event_forward(result.model, tokens, options, &cache);
        } catch (const NumericError& e) {
          throw DivergenceError("forward pass failed at epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(step) + ", sample " + std::to_string(order[i]) + ": " +
                                e.what() + "; parameter norm " + format_double(global_norm(params)));
        }
        if (!logits.allFinite()) {
          throw DivergenceError("non-finite logits at epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(step) + ", sample " + std::to_string(order[i]) +
                                ": logits [" + dump_logits(logits) + "], lr " + format_double(config.lr));
        }
        const auto loss = cross_entropy(logits, target);
        if (!std::isfinite(loss.loss)) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
        }
        train_m.loss += loss.loss;
        Eigen::Index best;
        logits.maxCoeff(&best);
        correct += static_cast<std::size_t>(best) == sample.label;
        layer::event_backward(result.model, tokens, cache, loss.grad / static_cast<double>(b1 - b0), grads, options);
      }
      clip_global_norm(grad_refs, config.grad_clip);
      AdamConfig adam_cfg{config.lr, config.beta1, config.beta2, 1e-8, config.weight_decay};
      if (config.warmup_steps > 0) {
        adam_cfg.lr *= std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps));
      }
      if (!adam_step(params, grad_refs, adam, adam_cfg)) ++result.skipped_steps;
      ++step;
    }
    train_m.loss /= static_cast<double>(order.size());
    train_m.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    train_m.wall_seconds = seconds_since(start);
    result.history.push_back(train_m);
    if (hooks.on_epoch) hooks.on_epoch(train_m);

    if (!data.val.empty()) {
      const auto val_start = Clock::now();
      EpochMetrics val_m = evaluate(result.model, data.val, options);
      val_m.epoch = epoch;
      val_m.split = "val";
      val_m.wall_seconds = seconds_since(val_start);
      result.history.push_back(val_m);
      if (hooks.on_epoch) hooks.on_epoch(val_m);
    }
  }
  return result;
}

void write_metrics(std::ostream& out, const std::vector<EpochMetrics>& history) {
  for (const auto& m : history) {
    out << "epoch=" << m.epoch << " split=" << m.split << " loss=" << format_double(m.loss)
        << " accuracy=" << format_double(m.accuracy) << " wall_seconds=" << format_double(m.wall_seconds) << '\n';
  }
}

std::vector<EpochMetrics> read_metrics(std::istream& in) {
  std::vector<EpochMetrics> history;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    EpochMetrics m;
    std::istringstream fields(line);
    int seen = 0;
    for (std::string kv; fields >> kv;) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw DataError("expected key=value, got '" + kv + "'", line_no);
      const auto key = kv.substr(0, eq);
      const auto value = kv.substr(eq + 1);
      try {
        if (key == "epoch") m.epoch = std::stoull(value), seen |= 1;
        else if (key == "split") m.split = value, seen |= 2;
        else if (key == "loss") m.loss = std::stod(value), seen |= 4;
        else if (key == "accuracy") m.accuracy = std::stod(value), seen |= 8;
        else if (key == "wall_seconds") m.wall_seconds = std::stod(value), seen |= 16;
      } catch (const std::exception&) {
        throw DataError("bad value for " + key, line_no);
      }
    }
    if (seen != 31) throw DataError("metrics record is missing fields", line_no);
    history.push_back(m);
  }
  return history;
}

bool same_metrics(const std::vector<EpochMetrics>& a, const std::vector<EpochMetrics>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].epoch != b[i].epoch || a[i].split != b[i].split || a[i].loss != b[i].loss ||
        a[i].accuracy != b[i].accuracy) {
      return false;
    }
  }
  return true;
}

}  // namespace stream::train
