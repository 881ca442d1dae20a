#pragma once

// Property suites behind `verify`: each probe measures one or more invariants
// on seeded random instances and reports the measured error against a bound.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "stream/common/worker_pool.hpp"

namespace stream::verify {

/// How a measurement is compared with its bound.
enum class Relation { at_most, above, equal };

struct Check {
  std::string id;  // "suite.property"
  double measured = 0.0;
  Relation relation = Relation::at_most;
  double bound = 0.0;
  std::string detail;

  bool passed() const;
};

struct SuiteContext {
  std::uint64_t seed = 0;
  WorkerPool* pool = nullptr;
  /// Test-only: run the scan properties with a combine whose sign is flipped.
  bool flip_combine_sign = false;
};

struct Probe {
  std::string suite;
  std::string name;
  /// Ids of the checks the probe emits, in order.
  std::vector<std::string> checks;
  std::function<std::vector<Check>(const SuiteContext&)> run;
};

/// Every probe, grouped by suite in report order.
const std::vector<Probe>& registry();

/// Suite names accepted by run_suite; "all" runs every probe.
std::vector<std::string> suite_names();

/// Throws ConfigError for an unknown suite. Probes run in registry order with
/// an rng derived from the seed and the probe name, so reports are reproducible.
std::vector<Check> run_suite(std::string_view suite, const SuiteContext& context);

/// One line per check, then a summary line; no timings, so equal seeds give equal text.
void write_report(std::ostream& out, std::string_view suite, const SuiteContext& context,
                  const std::vector<Check>& checks);

bool all_passed(const std::vector<Check>& checks);

enum class Coverage {
  asserted,    // a verify check enforces it
  documented,  // behaviour is described, deliberately not asserted
  harness,     // enforced by the test harness around the CLI itself
};

struct ManifestEntry {
  std::string module;
  std::string invariant;
  Coverage coverage = Coverage::asserted;
  std::vector<std::string> checks;
};

/// Every invariant stated for the library, with the check ids that enforce it.
const std::vector<ManifestEntry>& invariant_manifest();

}  // namespace stream::verify
