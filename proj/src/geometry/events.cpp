#include "stream/geometry/events.hpp"

#include <algorithm>
#include <cmath>

#include "stream/common/errors.hpp"

namespace stream::geometry {

void EventStream::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.x >= width || e.y >= height) {
      throw DataError("event " + std::to_string(i) + " at pixel (" + std::to_string(e.x) + ", " +
                      std::to_string(e.y) + ") outside a " + std::to_string(width) + "x" +
                      std::to_string(height) + " sensor");
    }
    if (e.polarity > 1) throw DataError("event " + std::to_string(i) + " has polarity " + std::to_string(e.polarity));
    if (i > 0 && e.t < events[i - 1].t) {
      throw OrderError("event " + std::to_string(i) + " goes back in time");
    }
  }
}

std::uint32_t token_id(const EventRecord& e, std::uint32_t width, std::uint32_t height) {
  if (e.x >= width || e.y >= height || e.polarity > 1) {
    throw DataError("event outside sensor bounds");
  }
  return e.polarity * width * height + static_cast<std::uint32_t>(e.y) * width + e.x;
}

layer::EventTokens tokenize_events(const EventStream& stream) {
  stream.validate();
  layer::EventTokens tokens;
  tokens.ids.reserve(stream.size());
  tokens.t.reserve(stream.size());
  for (const auto& e : stream.events) {
    tokens.ids.push_back(token_id(e, stream.width, stream.height));
    tokens.t.push_back(static_cast<double>(e.t) * 1e-6);
  }
  return tokens;
}

std::uint64_t duration(const EventStream& s) {
  if (s.events.empty()) return 0;
  return s.events.back().t - s.events.front().t + 1;
}

CutmixResult event_cutmix(const EventStream& a, const EventStream& b, std::uint64_t tau, std::uint64_t w) {
  if (a.events.empty() || b.events.empty()) throw ContractError("cutmix needs two nonempty streams");
  if (a.width != b.width || a.height != b.height) throw ContractError("cutmix streams differ in sensor size");
  a.validate();
  b.validate();
  const std::uint64_t a0 = a.events.front().t;
  const std::uint64_t b0 = b.events.front().t;
  if (tau < a0) throw ContractError("cutmix window starts before the first event");
  const std::uint64_t offset = tau - a0;
  const std::uint64_t end = tau + w;

  CutmixResult out;
  out.stream.width = a.width;
  out.stream.height = a.height;
  std::vector<EventRecord> inserted;
  for (const auto& e : a.events) {
    if (e.t < tau || e.t >= end) out.stream.events.push_back(e);
  }
  const std::size_t kept = out.stream.events.size();
  for (const auto& e : b.events) {
    if (e.t >= b0 + offset && e.t < b0 + offset + w) {
      EventRecord shifted = e;
      shifted.t = e.t - b0 + a0;
      out.stream.events.push_back(shifted);
    }
  }
  const std::size_t from_b = out.stream.events.size() - kept;
  std::stable_sort(out.stream.events.begin(), out.stream.events.end(),
                   [](const EventRecord& l, const EventRecord& r) { return l.t < r.t; });
  out.lambda = out.stream.events.empty() ? 0.0
                                         : static_cast<double>(from_b) / static_cast<double>(out.stream.events.size());
  return out;
}

CutmixResult event_cutmix(const EventStream& a, const EventStream& b, CounterRng& rng) {
  if (a.events.empty()) throw ContractError("cutmix needs two nonempty streams");
  const std::uint64_t d = duration(a);
  const std::uint64_t w = rng.below(d + 1);
  const std::uint64_t tau = a.events.front().t + rng.below(d - w + 1);
  return event_cutmix(a, b, tau, w);
}

std::vector<double> mix_labels(const std::vector<double>& a, const std::vector<double>& b, double lambda) {
  if (a.size() != b.size()) throw ContractError("label vectors differ in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("mixing weight outside [0, 1]");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - lambda) * a[i] + lambda * b[i];
  return out;
}

EventStream flip_x(const EventStream& s) {
  EventStream out = s;
  for (auto& e : out.events) e.x = static_cast<std::uint16_t>(s.width - 1 - e.x);
  return out;
}

EventStream flip_y(const EventStream& s) {
  EventStream out = s;
  for (auto& e : out.events) e.y = static_cast<std::uint16_t>(s.height - 1 - e.y);
  return out;
}

EventStream translate(const EventStream& s, int dx, int dy) {
  EventStream out = s;
  const auto clamp = [](long v, std::uint32_t size) {
    return static_cast<std::uint16_t>(std::clamp<long>(v, 0, static_cast<long>(size) - 1));
  };
  for (auto& e : out.events) {
    e.x = clamp(static_cast<long>(e.x) + dx, s.width);
    e.y = clamp(static_cast<long>(e.y) + dy, s.height);
  }
  return out;
}

EventStream time_scale(const EventStream& s, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ContractError("time scale factor must be positive");
  EventStream out = s;
  if (out.events.empty()) return out;
  const std::uint64_t t0 = s.events.front().t;
  for (auto& e : out.events) {
    e.t = t0 + static_cast<std::uint64_t>(std::llround(static_cast<double>(e.t - t0) * factor));
  }
  return out;
}

EventStream augment_events(const EventStream& stream, CounterRng& rng, const AugmentConfig& config) {
  EventStream out = stream;
  // Every draw happens regardless of the outcome, so the generator advances the
  // same way for every stream.
  const bool fx = rng.bernoulli(config.flip_x_prob);
  const bool fy = rng.bernoulli(config.flip_y_prob);
  const bool tr = rng.bernoulli(config.translate_prob);
  const auto span = static_cast<std::uint64_t>(2 * std::max(0, config.max_translate) + 1);
  const int dx = static_cast<int>(rng.below(span)) - std::max(0, config.max_translate);
  const int dy = static_cast<int>(rng.below(span)) - std::max(0, config.max_translate);
  const bool tj = rng.bernoulli(config.time_jitter_prob);
  const double factor = rng.uniform(config.jitter_lo, config.jitter_hi);
  if (fx) out = flip_x(out);
  if (fy) out = flip_y(out);
  if (tr) out = translate(out, dx, dy);
  if (tj) out = time_scale(out, factor);
  return out;
}

}  // namespace stream::geometry
