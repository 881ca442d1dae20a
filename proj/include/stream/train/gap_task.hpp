#pragma once

// Two-class event streams that differ only in their inter-event gaps.
//
// Samples come in pairs sharing one token sequence (same count, same pixels and
// polarities). Class 0 spaces the events about one period apart; class 1
// alternates short and long gaps with the same mean. A model that ignores
// timestamps therefore sees identical inputs for both classes.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stream/common/rng.hpp"
#include "stream/geometry/events.hpp"

namespace stream::train {

struct Sample {
  geometry::EventStream stream;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::size_t classes = 2;
};

struct GapTaskConfig {
  std::size_t train = 2000;
  std::size_t val = 500;
  std::uint32_t width = 4;
  std::uint32_t height = 4;
  std::size_t min_events = 128;
  std::size_t max_events = 256;
  double period_us = 1000.0;
  double jitter = 0.1;       // relative spread of every gap
  double alternation = 0.8;  // class 1 gaps are period * (1 -+ alternation)
};

/// Throws ConfigError on odd or empty split sizes and invalid gap settings.
Dataset make_gap_task(CounterRng& rng, const GapTaskConfig& config = {});

/// Inter-event gaps of a stream in microseconds.
std::vector<double> gaps_of(const geometry::EventStream& s);

/// Reference classifier: class 1 when the coefficient of variation of the gaps
/// exceeds `threshold`.
std::size_t hand_classify(const geometry::EventStream& s, double threshold = 0.3);

}  // namespace stream::train
