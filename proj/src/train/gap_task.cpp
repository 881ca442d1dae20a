#include "stream/train/gap_task.hpp"

#include <cmath>

#include "stream/common/errors.hpp"

namespace stream::train {
namespace {

std::vector<Sample> make_split(CounterRng& rng, const GapTaskConfig& c, std::size_t count) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t pair = 0; pair < count / 2; ++pair) {
    const std::size_t n = c.min_events + rng.below(c.max_events - c.min_events + 1);
    std::vector<geometry::EventRecord> base(n);
    for (auto& e : base) {
      e.x = static_cast<std::uint16_t>(rng.below(c.width));
      e.y = static_cast<std::uint16_t>(rng.below(c.height));
      e.polarity = static_cast<std::uint8_t>(rng.below(2));
    }
    const bool long_first = rng.bernoulli(0.5);
    const std::uint64_t start = rng.below(static_cast<std::uint64_t>(10 * c.period_us) + 1);
    for (std::size_t label = 0; label < 2; ++label) {
      Sample s;
      s.label = label;
      s.stream = {c.width, c.height, base};
      double t = static_cast<double>(start);
      for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) {
          double gap = c.period_us;
          if (label == 1) gap *= ((k % 2 == 1) == long_first) ? 1.0 + c.alternation : 1.0 - c.alternation;
          t += gap * (1.0 + c.jitter * rng.uniform(-1.0, 1.0));
        }
        s.stream.events[k].t = static_cast<std::uint64_t>(std::llround(t));
      }
      out.push_back(std::move(s));
    }
  }
  // Fisher-Yates so paired samples are not adjacent.
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
  return out;
}

}  // namespace

Dataset make_gap_task(CounterRng& rng, const GapTaskConfig& c) {
  if (c.train == 0 || c.val == 0 || c.train % 2 || c.val % 2) {
    throw ConfigError("gap task split sizes must be positive and even");
  }
  if (c.min_events < 2 || c.max_events < c.min_events) throw ConfigError("bad gap task event counts");
  if (c.width == 0 || c.height == 0) throw ConfigError("bad gap task sensor size");
  if (!(c.period_us >= 1.0) || !(c.jitter >= 0.0 && c.jitter < 1.0) ||
      !(c.alternation > 0.0 && c.alternation < 1.0)) {
    throw ConfigError("bad gap task timing");
  }
  Dataset d;
  d.width = c.width;
  d.height = c.height;
  d.classes = 2;
  CounterRng train_rng = rng.fork(0);
  CounterRng val_rng = rng.fork(1);
  d.train = make_split(train_rng, c, c.train);
  d.val = make_split(val_rng, c, c.val);
  return d;
}

std::vector<double> gaps_of(const geometry::EventStream& s) {
  std::vector<double> g;
  for (std::size_t k = 1; k < s.events.size(); ++k) {
    g.push_back(static_cast<double>(s.events[k].t - s.events[k - 1].t));
  }
  return g;
}

std::size_t hand_classify(const geometry::EventStream& s, double threshold) {
  const auto g = gaps_of(s);
  if (g.empty()) return 0;
  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double x : g) var += (x - mean) * (x - mean);
  var /= static_cast<double>(g.size());
  if (mean <= 0.0) return 0;
  return std::sqrt(var) / mean > threshold ? 1 : 0;
}

}  // namespace stream::train
