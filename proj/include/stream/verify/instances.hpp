#pragma once

// Random problem instances and error metrics shared by the verification suites
// and the test binaries.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "stream/common/rng.hpp"
#include "stream/scan/scan.hpp"
#include "stream/ssm/ssm_core.hpp"

namespace stream::verify {

/// max_k |x_k - y_k| / max_k |y_k|: error relative to the reference's scale.
template <class X, class Y>
double max_relative_error(const X& x, const Y& ref) {
  double diff = 0.0;
  double scale = 0.0;
  auto xi = std::begin(x);
  for (auto yi = std::begin(ref); yi != std::end(ref); ++yi, ++xi) {
    diff = std::max(diff, static_cast<double>(std::abs(*xi - *yi)));
    scale = std::max(scale, static_cast<double>(std::abs(*yi)));
  }
  return scale == 0.0 ? diff : diff / scale;
}

/// Stable complex A: Re in [-2, -0.05], Im in [-pi, pi].
inline ssm::DiagonalMatrixA random_stable_a(CounterRng& rng, std::size_t m, bool complex = true) {
  ssm::ComplexVector entries(m);
  for (auto& e : entries) {
    e = ssm::Complex(-rng.uniform(0.05, 2.0), complex ? rng.uniform(-3.14159, 3.14159) : 0.0);
  }
  return ssm::DiagonalMatrixA(std::move(entries));
}

inline ssm::ComplexVector random_complex_vector(CounterRng& rng, std::size_t m, bool complex = true) {
  ssm::ComplexVector v(m);
  for (auto& e : v) e = ssm::Complex(rng.uniform(-1, 1), complex ? rng.uniform(-1, 1) : 0.0);
  return v;
}

/// N steps with gaps in [0, max_gap) (a fraction exactly zero) and random b, c, u.
inline std::vector<ssm::SisoStep> random_steps(CounterRng& rng, std::size_t n, std::size_t m,
                                               double max_gap = 1.0, bool complex = true) {
  std::vector<ssm::SisoStep> steps(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& s = steps[k];
    s.delta = (k == 0 || rng.bernoulli(0.1)) ? 0.0 : rng.uniform(0.0, max_gap);
    s.b = random_complex_vector(rng, m, complex);
    s.c = random_complex_vector(rng, m, complex);
    s.u = rng.uniform(-1, 1);
  }
  return steps;
}

/// Random pairs resembling recurrence leaves: |a| <= 1, b in the unit box.
inline scan::PairSequence random_pairs(CounterRng& rng, std::size_t n, std::size_t m) {
  scan::PairSequence pairs(n, m);
  for (std::size_t k = 0; k < n; ++k) {
    auto a = pairs.a.row(k);
    auto b = pairs.b.row(k);
    for (std::size_t j = 0; j < m; ++j) {
      a[j] = std::polar(rng.uniform(0.5, 1.0), rng.uniform(-3.14159, 3.14159));
      b[j] = std::complex<double>(rng.uniform(-1, 1), rng.uniform(-1, 1));
    }
  }
  return pairs;
}

inline scan::ScanPair random_pair(CounterRng& rng, std::size_t m) {
  return random_pairs(rng, 1, m).pair(0);
}

}  // namespace stream::verify
