#include "stream/layer/event_model.hpp"

#include <cmath>

#include "stream/common/errors.hpp"

namespace stream::layer {

EventModel EventModel::init(const ModelConfig& config, std::uint32_t width, std::uint32_t height,
                            CounterRng& rng) {
  if (width == 0 || height == 0) throw ConfigError("sensor size must be positive");
  EventModel model;
  model.sensor_width = width;
  model.sensor_height = height;
  CounterRng stack_rng = rng.fork(0);
  model.stack = StackModel::init(config, stack_rng);
  CounterRng table_rng = rng.fork(1);
  const auto vocab = static_cast<Eigen::Index>(2ull * width * height);
  model.embedding.resize(vocab, static_cast<Eigen::Index>(config.n));
  for (Eigen::Index i = 0; i < model.embedding.size(); ++i) {
    model.embedding.data()[i] = table_rng.uniform(-1.0, 1.0);
  }
  return model;
}

EventModel EventModel::zeros_like(const EventModel& other) {
  EventModel z = other;
  z.for_each_param([](const ParamRef& r) { std::fill(r.data, r.data + r.size(), 0.0); });
  return z;
}

TokenSequence embed_tokens(const Matrix& table, const EventTokens& tokens) {
  if (tokens.ids.size() != tokens.t.size()) throw ContractError("token ids and coordinates differ in length");
  TokenSequence seq;
  seq.t = tokens.t;
  seq.features.resize(static_cast<Eigen::Index>(tokens.size()), table.cols());
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (tokens.ids[k] >= static_cast<std::size_t>(table.rows())) {
      throw ContractError("token id " + std::to_string(tokens.ids[k]) + " outside the embedding table");
    }
    seq.features.row(static_cast<Eigen::Index>(k)) = table.row(tokens.ids[k]);
  }
  return seq;
}

Vector event_forward(const EventModel& model, const EventTokens& tokens, const StackOptions& options,
                     EventCache* cache) {
  EventCache local;
  EventCache& cc = cache ? *cache : local;
  cc.seq = embed_tokens(model.embedding, tokens);
  return stack_forward(model.stack, cc.seq, options, &cc.stack);
}

void event_backward(const EventModel& model, const EventTokens& tokens, const EventCache& cache,
                    const Vector& d_logits, EventModel& grads, const StackOptions& options) {
  const Matrix d = stack_backward(model.stack, cache.stack, d_logits, grads.stack, options);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    grads.embedding.row(tokens.ids[k]) += d.row(static_cast<Eigen::Index>(k));
  }
}

StreamingClassifier::StreamingClassifier(const EventModel& model) : model_(&model) {
  for (const auto& block : model.stack.blocks) steppers_.emplace_back(block);
  reset();
}

void StreamingClassifier::reset() {
  for (auto& s : steppers_) s.reset();
  stage_counts_.assign(model_->stack.config.subsample_schedule.size(), 0);
  pooled_sum_ = Vector::Zero(static_cast<Eigen::Index>(model_->stack.config.n));
  pooled_count_ = 0;
  events_ = 0;
}

void StreamingClassifier::push(std::uint32_t id, double t) {
  if (id >= model_->vocab()) throw ContractError("token id " + std::to_string(id) + " outside the embedding table");
  const StackModel& stack = model_->stack;
  const ModelConfig& cfg = stack.config;
  ++events_;
  z_ = model_->embedding.row(id).transpose();
  std::size_t stage = 0;
  for (std::size_t position = 0; position <= cfg.layers; ++position) {
    for (; stage < cfg.subsample_schedule.size() && cfg.subsample_schedule[stage].position == position; ++stage) {
      if (++stage_counts_[stage] % cfg.subsample_schedule[stage].factor != 0) return;
    }
    if (position < cfg.layers) z_ = steppers_[position].step(t, z_);
  }
  if (cfg.final_norm) {
    const double inv = 1.0 / std::sqrt(z_.squaredNorm() / static_cast<double>(cfg.n) + kRmsEps);
    pooled_sum_ += (z_ * inv).cwiseProduct(stack.final_gain);
  } else {
    pooled_sum_ += z_;
  }
  ++pooled_count_;
}

std::optional<Vector> StreamingClassifier::logits() const {
  if (pooled_count_ == 0) return std::nullopt;
  return head_logits(model_->stack, pooled_sum_ / static_cast<double>(pooled_count_));
}

}  // namespace stream::layer
