#include "probes.hpp"
#include "stream/scan/adjoint.hpp"
#include "stream/scan/scan.hpp"
#include "stream/verify/faults.hpp"
#include "stream/verify/instances.hpp"

namespace stream::verify::detail {
namespace {

using scan::PairSequence;
using scan::ScanPair;

double pair_distance(const ScanPair& x, const ScanPair& y) {
  double d = 0.0;
  for (std::size_t j = 0; j < x.a.size(); ++j) {
    d = std::max({d, std::abs(x.a[j] - y.a[j]), std::abs(x.b[j] - y.b[j])});
  }
  return d;
}

template <class Op>
std::vector<Check> algebra(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "scan.algebra");
  double assoc = 0.0, ident = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = 1 + rng.below(4);
    const auto p = random_pair(rng, m);
    const auto q = random_pair(rng, m);
    const auto r = random_pair(rng, m);
    assoc = std::max(assoc, pair_distance(scan::combine<double, Op>(scan::combine<double, Op>(p, q), r),
                                          scan::combine<double, Op>(p, scan::combine<double, Op>(q, r))));
    const auto e = ScanPair::identity(m);
    ident = std::max({ident, pair_distance(scan::combine<double, Op>(p, e), p),
                      pair_distance(scan::combine<double, Op>(e, p), p)});
  }
  return {at_most("scan.associativity", assoc, 1e-13, "10^4 random triples"),
          at_most("scan.identity", ident, 1e-13, "left and right, 10^4 pairs")};
}

template <class Op>
std::vector<Check> parallel(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "scan.parallel");
  const std::size_t n = std::size_t{1} << 17;
  const std::size_t m = 2;
  const auto a = random_stable_a(rng, m);
  const auto steps = random_steps(rng, n, m, 0.05);
  const PairSequence leaves = scan::make_leaves(a, steps);
  const auto reference = scan::scan_sequential<double, Op>(leaves);

  double worst = 0.0;
  for (std::size_t w : {1u, 2u, 4u, 8u}) {
    auto out = leaves;
    scan::scan_parallel_inplace<double, Op>(out, *ctx.pool, w);
    worst = std::max({worst, max_relative_error(out.b.data(), reference.b.data()),
                      max_relative_error(out.a.data(), reference.a.data())});
  }

  auto chunked = leaves;
  scan::scan_parallel_inplace<double, Op>(chunked, *ctx.pool, 4);
  const auto states = ssm::run_states(a, steps, ssm::SisoState::zero(m));
  std::vector<std::complex<double>> flat;
  flat.reserve(n * m);
  for (const auto& s : states) flat.insert(flat.end(), s.h.begin(), s.h.end());
  const double state_err = max_relative_error(chunked.b.data(), flat);

  return {at_most("scan.parallel_matches_sequential", worst, 1e-9, "N=2^17, chunks 1,2,4,8"),
          at_most("scan.states_match_recurrence", state_err, 1e-11, "b components vs run_states")};
}

template <class Op>
std::vector<Check> work(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "scan.work");
  const auto pairs = random_pairs(rng, 10000, 1);
  scan::ScanStats seq;
  scan::scan_sequential<double, Op>(pairs, &seq);
  double ratio = 0.0;
  for (std::size_t chunks : {1u, 2u, 4u, 8u, 64u}) {
    scan::ScanStats par;
    auto out = pairs;
    scan::scan_parallel_inplace<double, Op>(out, *ctx.pool, chunks, &par);
    ratio = std::max(ratio, static_cast<double>(par.combines) / static_cast<double>(seq.combines));
  }
  return {at_most("scan.work_bound", ratio, 2.0, "parallel / sequential combines")};
}

template <template <class> class Fn>
std::vector<Check> dispatch(const SuiteContext& ctx) {
  return ctx.flip_combine_sign ? Fn<FlippedCombine>::run(ctx) : Fn<scan::Combine>::run(ctx);
}

template <class Op> struct Algebra { static std::vector<Check> run(const SuiteContext& c) { return algebra<Op>(c); } };
template <class Op> struct Parallel { static std::vector<Check> run(const SuiteContext& c) { return parallel<Op>(c); } };
template <class Op> struct Work { static std::vector<Check> run(const SuiteContext& c) { return work<Op>(c); } };

}  // namespace

void add_scan_probes(std::vector<Probe>& out) {
  out.push_back({"scan", "algebra", {"scan.associativity", "scan.identity"}, dispatch<Algebra>});
  out.push_back({"scan", "parallel", {"scan.parallel_matches_sequential", "scan.states_match_recurrence"},
                 dispatch<Parallel>});
  out.push_back({"scan", "work", {"scan.work_bound"}, dispatch<Work>});
}

}  // namespace stream::verify::detail
