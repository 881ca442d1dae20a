#include "stream/cli/bench.hpp"

#include <chrono>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>

#include "stream/common/errors.hpp"
#include "stream/scan/scan.hpp"
#include "stream/verify/instances.hpp"

namespace stream::cli {
namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
double best_seconds(std::size_t repeats, const scan::PairSequence& leaves, scan::PairSequence& work, Fn&& fn) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < repeats; ++r) {
    work = leaves;
    const auto start = Clock::now();
    fn(work);
    best = std::min(best, std::chrono::duration<double>(Clock::now() - start).count());
  }
  return best;
}

}  // namespace

void BenchConfig::validate() const {
  if (length == 0 || channels == 0 || m == 0) throw ConfigError("benchmark sizes must be positive");
  if (repeats == 0) throw ConfigError("benchmark needs at least one repeat");
  if (worker_counts.empty()) throw ConfigError("benchmark needs at least one worker count");
  for (auto w : worker_counts) {
    if (w == 0) throw ConfigError("worker counts must be positive");
  }
}

BenchResult run_bench(const BenchConfig& config) {
  config.validate();
  std::vector<std::unique_ptr<WorkerPool>> pools;
  for (auto w : config.worker_counts) pools.push_back(std::make_unique<WorkerPool>(w));

  double seq = 0.0, seq_double = 0.0;
  std::vector<double> par(config.worker_counts.size(), 0.0);
  scan::PairSequence work;
  const CounterRng root(config.seed);
  for (std::size_t c = 0; c < config.channels; ++c) {
    CounterRng rng = root.fork(c);
    const auto leaves = verify::random_pairs(rng, config.length, config.m);
    seq += best_seconds(config.repeats, leaves, work, [](scan::PairSequence& s) { scan::scan_sequential_inplace(s); });
    for (std::size_t i = 0; i < pools.size(); ++i) {
      par[i] += best_seconds(config.repeats, leaves, work, [&](scan::PairSequence& s) {
        scan::scan_parallel_inplace(s, *pools[i], config.worker_counts[i]);
      });
    }
    if (config.doubling) {
      CounterRng rng2 = root.fork(config.channels + c);
      const auto longer = verify::random_pairs(rng2, 2 * config.length, config.m);
      seq_double += best_seconds(config.repeats, longer, work, [](scan::PairSequence& s) { scan::scan_sequential_inplace(s); });
    }
  }

  BenchResult result;
  const auto n = static_cast<double>(config.length);
  result.rows.push_back({"sequential", 1, config.length, seq, n / seq, 1.0});
  for (std::size_t i = 0; i < par.size(); ++i) {
    result.rows.push_back({"parallel", config.worker_counts[i], config.length, par[i], n / par[i], seq / par[i]});
  }
  if (config.doubling) {
    result.rows.push_back({"sequential", 1, 2 * config.length, seq_double, 2.0 * n / seq_double, 1.0});
    result.doubling_ratio = seq_double / seq;
  }
  return result;
}

void write_bench(std::ostream& out, const BenchConfig& config, const BenchResult& result) {
  char line[160];
  out << "bench channels=" << config.channels << " m=" << config.m << " repeats=" << config.repeats
      << " seed=" << config.seed << '\n';
  std::snprintf(line, sizeof line, "%-10s %7s %9s %12s %14s %8s\n", "mode", "workers", "length", "seconds",
                "tokens_per_s", "speedup");
  out << line;
  for (const auto& r : result.rows) {
    std::snprintf(line, sizeof line, "%-10s %7zu %9zu %12.6e %14.6e %8.3f\n", r.mode.c_str(), r.workers, r.length,
                  r.seconds, r.tokens_per_second, r.speedup);
    out << line;
  }
  if (result.doubling_ratio > 0.0) {
    std::snprintf(line, sizeof line, "doubling_ratio=%.3f\n", result.doubling_ratio);
    out << line;
  }
}

}  // namespace stream::cli
