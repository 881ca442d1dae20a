#pragma once

// Deliberately broken operators for exercising the verification harness.

#include <complex>
#include <span>

namespace stream::verify {

/// The pair operator with the sign of the carried b term flipped:
/// [a_i, b_i] . [a_j, b_j] = [a_i a_j, a_j b_i - b_j].
struct FlippedCombine {
  template <class Real>
  static void apply(std::span<const std::complex<Real>> left_a,
                    std::span<const std::complex<Real>> left_b,
                    std::span<std::complex<Real>> right_a, std::span<std::complex<Real>> right_b) {
    for (std::size_t j = 0; j < right_a.size(); ++j) {
      right_b[j] = right_a[j] * left_b[j] - right_b[j];
      right_a[j] = left_a[j] * right_a[j];
    }
  }
};

}  // namespace stream::verify
