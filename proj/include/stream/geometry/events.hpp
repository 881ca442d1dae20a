#pragma once

// Event-camera streams: tokenization, CutMix-style splicing and geometric
// augmentation.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stream/common/rng.hpp"
#include "stream/layer/event_model.hpp"

namespace stream::geometry {

struct EventRecord {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t polarity = 0;

  bool operator==(const EventRecord&) const = default;
};

struct EventStream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<EventRecord> events;

  std::size_t size() const { return events.size(); }
  /// Throws DataError on out-of-bounds pixels or polarity, OrderError on decreasing time.
  void validate() const;
  bool operator==(const EventStream&) const = default;
};

/// polarity * width * height + y * width + x.
std::uint32_t token_id(const EventRecord& e, std::uint32_t width, std::uint32_t height);

/// One token per event, coordinates converted to seconds.
layer::EventTokens tokenize_events(const EventStream& stream);

struct CutmixResult {
  EventStream stream;
  /// Fraction of output events taken from the second stream.
  double lambda = 0.0;
};

/// Removes a's events with t in [tau, tau + w) and inserts b's events from the
/// window at the same offset from b's first event, shifted onto a's time axis.
/// The result is stably sorted by time with a's events first among equals.
CutmixResult event_cutmix(const EventStream& a, const EventStream& b, std::uint64_t tau, std::uint64_t w);
/// Random window: w uniform in [0, duration(a)], tau uniform over the valid starts.
CutmixResult event_cutmix(const EventStream& a, const EventStream& b, CounterRng& rng);

/// Inclusive duration t_last - t_first + 1 (0 for an empty stream).
std::uint64_t duration(const EventStream& s);

/// (1 - lambda) * a + lambda * b.
std::vector<double> mix_labels(const std::vector<double>& a, const std::vector<double>& b, double lambda);

struct AugmentConfig {
  double flip_x_prob = 0.5;
  double flip_y_prob = 0.0;
  double translate_prob = 0.5;
  int max_translate = 2;  // pixels, per axis
  double time_jitter_prob = 0.5;
  double jitter_lo = 0.9;
  double jitter_hi = 1.1;
};

/// Applies each enabled augmentation with its probability. Pixels are clamped to
/// the sensor.
EventStream augment_events(const EventStream& stream, CounterRng& rng, const AugmentConfig& config);

EventStream flip_x(const EventStream& s);
EventStream flip_y(const EventStream& s);
EventStream translate(const EventStream& s, int dx, int dy);
/// t' = t_0 + round((t - t_0) * factor).
EventStream time_scale(const EventStream& s, double factor);

}  // namespace stream::geometry
