#include "probes.hpp"
#include "stream/ssm/ssm_core.hpp"
#include "stream/verify/instances.hpp"

namespace stream::verify::detail {
namespace {

using ssm::Complex;
using ssm::ComplexVector;
using ssm::SisoStep;

// Steps built from absolute coordinates with time-invariant b and c.
std::vector<SisoStep> lti_steps(const std::vector<double>& t, const ComplexVector& b,
                                const ComplexVector& c, const std::vector<double>& u) {
  std::vector<SisoStep> steps(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) steps[k] = {k == 0 ? 0.0 : t[k] - t[k - 1], b, c, u[k]};
  return steps;
}

struct LtiInstance {
  ssm::DiagonalMatrixA a;
  ComplexVector b, c;
  std::vector<double> t, u;
};

LtiInstance random_lti(CounterRng& rng, std::size_t n, std::size_t m) {
  LtiInstance inst{random_stable_a(rng, m), random_complex_vector(rng, m), random_complex_vector(rng, m), {}, {}};
  double now = rng.uniform(0.0, 4.0);
  for (std::size_t k = 0; k < n; ++k) {
    now += k == 0 ? 0.0 : rng.uniform(0.0, 0.3);
    inst.t.push_back(now);
    inst.u.push_back(rng.uniform(-1, 1));
  }
  return inst;
}

std::vector<Check> oracle(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "ssm.oracle");
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(256);
    const std::size_t m = 1 + rng.below(8);
    const auto a = random_stable_a(rng, m);
    const auto steps = random_steps(rng, n, m);
    worst = std::max(worst, max_relative_error(ssm::run_sequential(a, steps), ssm::apply_kernel_oracle(a, steps)));
  }
  return {at_most("ssm.oracle_equivalence", worst, 1e-10, "100 instances, N<=256, m<=8")};
}

std::vector<Check> causality(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "ssm.causality");
  double before = 0.0;
  double at = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_stable_a(rng, 4);
    const auto steps = random_steps(rng, 40, 4);
    const auto base = ssm::run_sequential(a, steps);
    const std::size_t j = rng.below(steps.size());
    auto perturbed = steps;
    perturbed[j].u += 0.5;
    const auto y = ssm::run_sequential(a, perturbed);
    for (std::size_t k = 0; k < j; ++k) before = std::max(before, std::abs(y[k] - base[k]));
    // y_j moves by 0.5 Re(c_j . b_j), which is almost surely nonzero
    at = std::min(at, std::abs(y[j] - base[j]));
  }
  return {equal("ssm.causality_past_unchanged", before, 0.0, "max |dy_k|, k < j"),
          above("ssm.causality_present_changes", at, 0.0, "min |dy_j|")};
}

std::vector<Check> zero_gap(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "ssm.zero_gap");
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_stable_a(rng, 3);
    auto steps = random_steps(rng, 50, 3);
    for (auto& s : steps) s.delta = 0.0;
    ComplexVector sum(3);
    std::vector<double> expected;
    for (const auto& s : steps) {
      Complex y = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        sum[j] += s.b[j] * s.u;
        y += s.c[j] * sum[j];
      }
      expected.push_back(y.real());
    }
    worst = std::max(worst, max_relative_error(ssm::run_sequential(a, steps), expected));
  }
  return {at_most("ssm.zero_gap_cumulative_sum", worst, 1e-13)};
}

std::vector<Check> stability(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "ssm.stability");
  double ratio = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_stable_a(rng, 5);
    const auto steps = random_steps(rng, 200, 5, rng.uniform(0.001, 2.0));
    const ssm::SisoState h0{random_complex_vector(rng, 5)};
    const auto states = ssm::run_states(a, steps, h0);
    for (std::size_t j = 0; j < 5; ++j) {
      double bound = std::abs(h0.h[j]);
      for (std::size_t k = 0; k < steps.size(); ++k) {
        bound += std::abs(steps[k].b[j] * steps[k].u);
        const double mag = std::abs(states[k].h[j]);
        ratio = std::max(ratio, std::isfinite(mag) ? mag / bound : HUGE_VAL);
      }
    }
  }
  return {at_most("ssm.stability_bound", ratio, 1.0 + 1e-12, "max |h_k| / (|h_0| + sum |b u|)")};
}

std::vector<Check> lti(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "ssm.lti");
  double shift_err = 0.0, scale_err = 0.0, kernel_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_lti(rng, 64, 4);
    const auto y = ssm::run_sequential(inst.a, lti_steps(inst.t, inst.b, inst.c, inst.u));

    auto shifted = inst.t;
    const double offset = rng.uniform(-100.0, 100.0);
    for (auto& v : shifted) v += offset;
    shift_err = std::max(shift_err, max_relative_error(
        ssm::run_sequential(inst.a, lti_steps(shifted, inst.b, inst.c, inst.u)), y));

    const double s = rng.uniform(0.25, 4.0);
    auto scaled = inst.t;
    for (auto& v : scaled) v *= s;
    ComplexVector a_scaled(inst.a.entries().begin(), inst.a.entries().end());
    for (auto& e : a_scaled) e /= s;
    scale_err = std::max(scale_err, max_relative_error(
        ssm::run_sequential(ssm::DiagonalMatrixA(a_scaled), lti_steps(scaled, inst.b, inst.c, inst.u)), y));

    // Phi(t_k, t_i) against the closed form c . exp(A (t_k - t_i)) . b
    const auto steps = lti_steps(inst.t, inst.b, inst.c, inst.u);
    std::vector<double> got, want;
    for (std::size_t k = 0; k < steps.size(); k += 7) {
      for (std::size_t i = 0; i <= k; i += 3) {
        got.push_back(ssm::kernel_value(inst.a, steps, k, i));
        Complex phi = 0.0;
        for (std::size_t j = 0; j < 4; ++j) phi += inst.c[j] * std::exp(inst.a[j] * (inst.t[k] - inst.t[i])) * inst.b[j];
        want.push_back(phi.real());
      }
    }
    kernel_err = std::max(kernel_err, max_relative_error(got, want));
  }
  return {at_most("ssm.lti_kernel_depends_on_gap", kernel_err, 1e-12),
          at_most("ssm.lti_translation_invariance", shift_err, 1e-12),
          at_most("ssm.lti_gap_scaling_covariance", scale_err, 1e-12)};
}

}  // namespace

void add_ssm_probes(std::vector<Probe>& out) {
  out.push_back({"ssm", "oracle", {"ssm.oracle_equivalence"}, oracle});
  out.push_back({"ssm", "causality", {"ssm.causality_past_unchanged", "ssm.causality_present_changes"}, causality});
  out.push_back({"ssm", "zero_gap", {"ssm.zero_gap_cumulative_sum"}, zero_gap});
  out.push_back({"ssm", "stability", {"ssm.stability_bound"}, stability});
  out.push_back({"ssm", "lti",
                 {"ssm.lti_kernel_depends_on_gap", "ssm.lti_translation_invariance", "ssm.lti_gap_scaling_covariance"},
                 lti});
}

}  // namespace stream::verify::detail
