#pragma once

// Event-stream classifier: one embedding row per (pixel, polarity) token, the
// block stack on top, and an O(1)-per-event recurrent evaluator.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "stream/layer/stack.hpp"

namespace stream::layer {

/// Token ids with their ordering coordinates (seconds), one entry per event.
struct EventTokens {
  std::vector<std::uint32_t> ids;
  std::vector<double> t;

  std::size_t size() const { return ids.size(); }
};

struct EventModel {
  std::uint32_t sensor_width = 0;
  std::uint32_t sensor_height = 0;
  Matrix embedding;  // (2 * width * height) x n
  StackModel stack;

  static EventModel init(const ModelConfig& config, std::uint32_t width, std::uint32_t height,
                         CounterRng& rng);
  static EventModel zeros_like(const EventModel& other);
  std::size_t vocab() const { return static_cast<std::size_t>(embedding.rows()); }

  template <class Fn>
  void for_each_param(Fn&& fn) {
    fn(param_ref("embedding", embedding));
    stack.for_each_param(fn);
  }
};

/// Feature rows looked up from `table`. Throws ContractError on ids outside the table.
TokenSequence embed_tokens(const Matrix& table, const EventTokens& tokens);

struct EventCache {
  TokenSequence seq;
  StackCache stack;
};

Vector event_forward(const EventModel& model, const EventTokens& tokens,
                     const StackOptions& options = {}, EventCache* cache = nullptr);
/// Accumulates gradients, including the embedding rows that were used.
void event_backward(const EventModel& model, const EventTokens& tokens, const EventCache& cache,
                    const Vector& d_logits, EventModel& grads, const StackOptions& options = {});

/// Recurrent evaluation of an EventModel, one event at a time. After k events
/// the logits equal event_forward on those k events whenever k is a multiple of
/// the subsample product.
class StreamingClassifier {
 public:
  explicit StreamingClassifier(const EventModel& model);

  void push(std::uint32_t id, double t);
  /// Number of tokens that reached the pooling layer so far.
  std::size_t pooled_tokens() const { return pooled_count_; }
  std::size_t events() const { return events_; }
  /// Empty until at least one token reached the pooling layer.
  std::optional<Vector> logits() const;
  void reset();

 private:
  const EventModel* model_;
  std::vector<BlockStepper> steppers_;
  std::vector<std::size_t> stage_counts_;
  Vector pooled_sum_;
  Vector z_;
  std::size_t pooled_count_ = 0;
  std::size_t events_ = 0;
};

}  // namespace stream::layer
