#include <cmath>
#include <limits>

#include "doctest.h"
#include "stream/common/errors.hpp"
#include "stream/ssm/ssm_core.hpp"
#include "stream/verify/instances.hpp"

using namespace stream;
using namespace stream::ssm;
using stream::verify::max_relative_error;

namespace {

SisoStep unit_step(double delta, double u, std::size_t m = 1) {
  return SisoStep{delta, ComplexVector(m, 1.0), ComplexVector(m, 1.0), u};
}

// Steps whose gaps come from absolute coordinates t, with time-invariant b and c.
std::vector<SisoStep> lti_steps(const std::vector<double>& t, const ComplexVector& b,
                                const ComplexVector& c, const std::vector<double>& u) {
  std::vector<SisoStep> steps(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    steps[k] = SisoStep{k == 0 ? 0.0 : t[k] - t[k - 1], b, c, u[k]};
  }
  return steps;
}

}  // namespace

TEST_CASE("A = 0 turns the recurrence into a running sum") {
  const DiagonalMatrixA a(ComplexVector{0.0});
  SisoState h = SisoState::zero(1);
  const double expected[] = {1, 3, 6};
  for (int i = 0; i < 3; ++i) {
    h = step(h, a, unit_step(0.37 * i, i + 1.0));
    CHECK(h.h[0].real() == expected[i]);
    CHECK(h.h[0].imag() == 0.0);
  }
}

TEST_CASE("zero gap leaves the state untouched before injection") {
  const DiagonalMatrixA a(ComplexVector{-1.0});
  const SisoState h{ComplexVector{5.0}};
  const SisoState next = step(h, a, SisoStep{0.0, {1.0}, {1.0}, 2.0});
  CHECK(next.h[0] == Complex(7.0));
  const auto t = a.transition(0.0);
  CHECK(t[0] == Complex(1.0));
}

TEST_CASE("step matches the per-entry closed form") {
  CounterRng rng(11);
  const double a_re[] = {-1.0, -0.5};
  const DiagonalMatrixA a(ComplexVector{a_re[0], a_re[1]});
  const SisoState h{verify::random_complex_vector(rng, 2)};
  SisoStep s{0.3, verify::random_complex_vector(rng, 2), verify::random_complex_vector(rng, 2),
             rng.uniform(-1, 1)};
  const SisoState next = step(h, a, s);
  for (int j = 0; j < 2; ++j) {
    const double decay = std::exp(a_re[j] * 0.3);
    CHECK(next.h[j].real() == doctest::Approx(decay * h.h[j].real() + s.b[j].real() * s.u).epsilon(1e-15));
    CHECK(next.h[j].imag() == doctest::Approx(decay * h.h[j].imag() + s.b[j].imag() * s.u).epsilon(1e-15));
  }
}

TEST_CASE("construction and step errors") {
  CHECK_THROWS_AS(DiagonalMatrixA(ComplexVector{}), ContractError);
  CHECK_THROWS_AS(DiagonalMatrixA(ComplexVector{Complex(0.1, 0.0)}), ContractError);
  const DiagonalMatrixA a(ComplexVector{-1.0, -2.0});
  CHECK_THROWS_AS(step(SisoState::zero(2), a, unit_step(0.1, 1.0, 1)), ContractError);
  CHECK_THROWS_AS(step(SisoState::zero(3), a, unit_step(0.1, 1.0, 2)), ContractError);
  CHECK_THROWS_AS(step(SisoState::zero(2), a, unit_step(-0.1, 1.0, 2)), ContractError);

  std::vector<SisoStep> steps = {unit_step(0, 1, 2), unit_step(0.1, 1, 2), unit_step(0.2, 1, 2)};
  steps[2].u = std::numeric_limits<double>::quiet_NaN();
  try {
    run_sequential(a, steps);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 2);
  }
  CHECK_THROWS_AS(run_sequential(a, std::span<const SisoStep>{}), ContractError);
}

TEST_CASE("from_raw keeps the real part non-positive") {
  const double raw[] = {-40.0, 0.0, 3.0};
  const double im[] = {0.0, 1.0, -2.0};
  const auto a = DiagonalMatrixA::from_raw(raw, im);
  for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j].real() <= 0.0);
  CHECK(a[1].real() == doctest::Approx(-std::log(2.0)));
  CHECK(a[2].imag() == -2.0);
}

TEST_CASE("run_sequential basics") {
  const DiagonalMatrixA a0(ComplexVector{0.0});
  const std::vector<SisoStep> one = {unit_step(0, 4)};
  CHECK(run_sequential(a0, one) == std::vector<double>{4.0});

  CounterRng rng(3);
  const auto a = verify::random_stable_a(rng, 2);
  auto steps = verify::random_steps(rng, 6, 2);
  CHECK(max_relative_error(run_sequential(a, steps), apply_kernel_oracle(a, steps)) < 1e-12);

  for (auto& s : steps) s.u = 0.0;
  for (double y : run_sequential(a, steps)) CHECK(y == 0.0);
}

TEST_CASE("kernel_value conventions") {
  CounterRng rng(5);
  const auto a = verify::random_stable_a(rng, 2);
  std::vector<SisoStep> steps = {unit_step(0, 1, 2), unit_step(0.4, 1, 2)};
  CHECK(kernel_value(a, steps, 1, 1) == doctest::Approx(2.0));
  CHECK(kernel_value(a, steps, 0, 0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(kernel_value(a, steps, 0, 1), OrderError);
  CHECK_THROWS_AS(kernel_value(a, steps, 2, 0), ContractError);
}

TEST_CASE("LTI kernel depends only on the coordinate gap") {
  CounterRng rng(8);
  const auto a = verify::random_stable_a(rng, 3);
  const auto b = verify::random_complex_vector(rng, 3);
  const auto c = verify::random_complex_vector(rng, 3);
  const std::vector<double> u(6, 1.0);
  // pairs (k, i) with the same t_k - t_i = 1.5 but different absolute positions
  const std::vector<double> t1 = {0.0, 0.5, 2.0, 2.1, 3.6, 4.0};
  const auto s1 = lti_steps(t1, b, c, u);
  const double phi_a = kernel_value(a, s1, 2, 1);  // 2.0 - 0.5
  const double phi_b = kernel_value(a, s1, 4, 3);  // 3.6 - 2.1
  CHECK(phi_a == doctest::Approx(phi_b).epsilon(1e-12));
  // closed form c . exp(A * 1.5) . b
  Complex expected = 0.0;
  for (std::size_t j = 0; j < 3; ++j) expected += c[j] * std::exp(a[j] * 1.5) * b[j];
  CHECK(phi_a == doctest::Approx(expected.real()).epsilon(1e-12));
}

TEST_CASE("kernel matrix applied by double loop reproduces the recurrence") {
  CounterRng rng(21);
  const auto a = verify::random_stable_a(rng, 3);
  const auto steps = verify::random_steps(rng, 7, 3);
  std::vector<double> y(steps.size(), 0.0);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    for (std::size_t i = 0; i <= k; ++i) y[k] += kernel_value(a, steps, k, i) * steps[i].u;
  }
  CHECK(max_relative_error(run_sequential(a, steps), y) < 1e-12);
}

TEST_CASE("apply_kernel_oracle") {
  CounterRng rng(34);
  const auto a = verify::random_stable_a(rng, 4);
  auto one = verify::random_steps(rng, 1, 4);
  Complex cb = 0.0;
  for (std::size_t j = 0; j < 4; ++j) cb += one[0].c[j] * one[0].b[j];
  CHECK(apply_kernel_oracle(a, one)[0] == doctest::Approx(cb.real() * one[0].u).epsilon(1e-15));

  const auto a8 = verify::random_stable_a(rng, 8);
  const auto steps = verify::random_steps(rng, 256, 8);
  CHECK(max_relative_error(run_sequential(a8, steps), apply_kernel_oracle(a8, steps)) < 1e-10);
}

TEST_CASE("LTI with real A is a causal convolution over absolute coordinates") {
  CounterRng rng(55);
  const auto a = verify::random_stable_a(rng, 3, false);
  const auto b = verify::random_complex_vector(rng, 3, false);
  const auto c = verify::random_complex_vector(rng, 3, false);
  std::vector<double> t(40), u(40);
  double now = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    now += k == 0 ? 0.0 : rng.uniform(0.0, 0.5);
    t[k] = now;
    u[k] = rng.uniform(-1, 1);
  }
  std::vector<double> conv(t.size(), 0.0);
  for (std::size_t k = 0; k < t.size(); ++k) {
    for (std::size_t i = 0; i <= k; ++i) {
      double kernel = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        kernel += c[j].real() * std::exp(a[j].real() * (t[k] - t[i])) * b[j].real();
      }
      conv[k] += kernel * u[i];
    }
  }
  CHECK(max_relative_error(apply_kernel_oracle(a, lti_steps(t, b, c, u)), conv) < 1e-12);
}

TEST_CASE("causality: perturbing u_j only affects y_k for k >= j") {
  CounterRng rng(89);
  const auto a = verify::random_stable_a(rng, 4);
  auto steps = verify::random_steps(rng, 30, 4);
  const auto base = run_sequential(a, steps);
  for (std::size_t j : {0u, 7u, 29u}) {
    auto perturbed = steps;
    perturbed[j].u += 0.5;
    const auto y = run_sequential(a, perturbed);
    for (std::size_t k = 0; k < j; ++k) CHECK(y[k] == base[k]);
    CHECK(y[j] != base[j]);
  }
}

TEST_CASE("zero gaps reduce to projected cumulative sums") {
  CounterRng rng(144);
  const auto a = verify::random_stable_a(rng, 3);
  auto steps = verify::random_steps(rng, 20, 3);
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
  CHECK(max_relative_error(run_sequential(a, steps), expected) < 1e-14);
}

TEST_CASE("stability bound on state magnitude") {
  CounterRng rng(233);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = verify::random_stable_a(rng, 5);
    const auto steps = verify::random_steps(rng, 200, 5, 0.01);
    const SisoState h0{verify::random_complex_vector(rng, 5)};
    const auto states = run_states(a, steps, h0);
    for (std::size_t j = 0; j < 5; ++j) {
      double bound = std::abs(h0.h[j]);
      for (std::size_t k = 0; k < steps.size(); ++k) {
        bound += std::abs(steps[k].b[j] * steps[k].u);
        REQUIRE(std::isfinite(std::abs(states[k].h[j])));
        CHECK(std::abs(states[k].h[j]) <= bound * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("LTI outputs are invariant to translation and covariant to gap scaling") {
  CounterRng rng(377);
  const auto a = verify::random_stable_a(rng, 4);
  const auto b = verify::random_complex_vector(rng, 4);
  const auto c = verify::random_complex_vector(rng, 4);
  std::vector<double> t(64), u(64);
  double now = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    now += k == 0 ? 0.0 : rng.uniform(0.0, 0.3);
    t[k] = now;
    u[k] = rng.uniform(-1, 1);
  }
  const auto y = run_sequential(a, lti_steps(t, b, c, u));

  auto shifted = t;
  for (auto& v : shifted) v += 12.25;
  CHECK(max_relative_error(run_sequential(a, lti_steps(shifted, b, c, u)), y) < 1e-12);

  const double s = 3.0;
  auto scaled = t;
  for (auto& v : scaled) v *= s;
  ComplexVector a_scaled(a.entries().begin(), a.entries().end());
  for (auto& e : a_scaled) e /= s;
  CHECK(max_relative_error(run_sequential(DiagonalMatrixA(a_scaled), lti_steps(scaled, b, c, u)), y) <
        1e-12);
}
