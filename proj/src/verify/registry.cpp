#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "probes.hpp"
#include "stream/common/errors.hpp"

namespace stream::verify {
namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string_view relation_symbol(Relation r) {
  switch (r) {
    case Relation::at_most: return "<=";
    case Relation::above: return ">";
    case Relation::equal: return "==";
  }
  return "?";
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

}  // namespace

bool Check::passed() const {
  if (!std::isfinite(measured)) return false;
  switch (relation) {
    case Relation::at_most: return measured <= bound;
    case Relation::above: return measured > bound;
    case Relation::equal: return measured == bound;
  }
  return false;
}

namespace detail {

CounterRng probe_rng(const SuiteContext& context, const std::string& name) {
  return CounterRng(context.seed).fork(fnv1a(name));
}

}  // namespace detail

const std::vector<Probe>& registry() {
  static const std::vector<Probe> probes = [] {
    std::vector<Probe> out;
    detail::add_ssm_probes(out);
    detail::add_scan_probes(out);
    detail::add_grad_probes(out);
    detail::add_layer_probes(out);
    detail::add_geometry_probes(out);
    detail::add_train_probes(out);
    return out;
  }();
  return probes;
}

std::vector<std::string> suite_names() {
  std::vector<std::string> names;
  for (const auto& p : registry()) {
    if (std::find(names.begin(), names.end(), p.suite) == names.end()) names.push_back(p.suite);
  }
  names.push_back("all");
  return names;
}

std::vector<Check> run_suite(std::string_view suite, const SuiteContext& context) {
  const auto names = suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown suite '" + std::string(suite) + "' (known: " + known + ")");
  }
  WorkerPool fallback(1);
  SuiteContext ctx = context;
  if (!ctx.pool) ctx.pool = &fallback;

  std::vector<Check> checks;
  for (const auto& probe : registry()) {
    if (suite != "all" && probe.suite != suite) continue;
    auto got = probe.run(ctx);
    if (got.size() != probe.checks.size()) {
      throw std::logic_error("probe " + probe.name + " emitted an unexpected number of checks");
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].id != probe.checks[i]) {
        throw std::logic_error("probe " + probe.name + " emitted undeclared check " + got[i].id);
      }
      checks.push_back(std::move(got[i]));
    }
  }
  return checks;
}

void write_report(std::ostream& out, std::string_view suite, const SuiteContext& context,
                  const std::vector<Check>& checks) {
  out << "verify suite=" << suite << " seed=" << context.seed
      << (context.flip_combine_sign ? " fault=flip_combine_sign" : "") << '\n';
  std::size_t failed = 0;
  for (const auto& c : checks) {
    const bool ok = c.passed();
    failed += !ok;
    out << (ok ? "PASS " : "FAIL ") << c.id << " measured=" << format_value(c.measured) << ' '
        << relation_symbol(c.relation) << ' ' << format_value(c.bound);
    if (!c.detail.empty()) out << " (" << c.detail << ')';
    out << '\n';
  }
  out << "summary checks=" << checks.size() << " passed=" << checks.size() - failed
      << " failed=" << failed << '\n';
}

bool all_passed(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed(); });
}

}  // namespace stream::verify
