#pragma once

// Scan throughput benchmark: sequential scan against the chunked parallel scan
// over several worker counts.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace stream::cli {

struct BenchConfig {
  std::size_t length = 65536;  // tokens per channel
  std::size_t channels = 16;
  std::size_t m = 4;           // state size per channel
  std::vector<std::size_t> worker_counts{1, 2, 4};
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  /// Also time the sequential scan at twice the length.
  bool doubling = true;

  /// Throws ConfigError on zero sizes or an empty worker list.
  void validate() const;
};

struct BenchRow {
  std::string mode;  // "sequential" or "parallel"
  std::size_t workers = 1;
  std::size_t length = 0;
  double seconds = 0.0;            // all channels, best of the repeats per channel
  double tokens_per_second = 0.0;  // length / seconds
  double speedup = 0.0;            // sequential seconds at the same length / seconds
};

struct BenchResult {
  std::vector<BenchRow> rows;
  /// Sequential seconds at 2N over seconds at N; 0 when not measured.
  double doubling_ratio = 0.0;
};

/// Channels are generated one at a time and scanned in place, so memory stays
/// at two length x m planes whatever the channel count.
BenchResult run_bench(const BenchConfig& config);

void write_bench(std::ostream& out, const BenchConfig& config, const BenchResult& result);

}  // namespace stream::cli
