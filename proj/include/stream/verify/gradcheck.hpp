#pragma once

// Central finite differences: the independent oracle for every gradient path.

#include <algorithm>
#include <cmath>
#include <span>

namespace stream::verify {

/// (f(x + h) - f(x - h)) / 2h with h = rel_step * max(1, |x|). `f` is called
/// with the perturbed value and must evaluate the objective; `x` is restored.
template <class F>
double central_difference(double& x, F&& f, double rel_step = 1e-6) {
  const double x0 = x;
  const double h = rel_step * std::max(1.0, std::abs(x0));
  x = x0 + h;
  const double up = f();
  x = x0 - h;
  const double down = f();
  x = x0;
  return (up - down) / (2.0 * h);
}

/// Fourth-order stencil (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h. The
/// larger default step keeps roundoff small when the objective is much larger
/// than the derivative being probed.
template <class F>
double five_point_difference(double& x, F&& f, double rel_step = 1e-3) {
  const double x0 = x;
  const double h = rel_step * std::max(1.0, std::abs(x0));
  double v[4];
  const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
  for (int i = 0; i < 4; ++i) {
    x = x0 + offsets[i] * h;
    v[i] = f();
  }
  x = x0;
  return ((v[3] - v[0]) + 8.0 * (v[1] - v[2])) / (12.0 * h);
}

/// Entrywise relative error max_i |a_i - r_i| / max(|a_i|, |r_i|, floor_abs).
inline double gradient_error_abs_floor(std::span<const double> adjoint, std::span<const double> reference,
                                       double floor_abs) {
  const double tiny = std::max(floor_abs, 1e-300);
  double worst = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double denom = std::max({std::abs(adjoint[i]), std::abs(reference[i]), tiny});
    worst = std::max(worst, std::abs(adjoint[i] - reference[i]) / denom);
  }
  return worst;
}

/// Entrywise relative error max_i |a_i - r_i| / max(|a_i|, |r_i|, floor * max_i |r_i|).
/// The floor keeps entries that are zero up to rounding from dominating.
inline double gradient_error(std::span<const double> adjoint, std::span<const double> reference,
                             double floor = 1e-3) {
  double scale = 0.0;
  for (double r : reference) scale = std::max(scale, std::abs(r));
  return gradient_error_abs_floor(adjoint, reference, floor * scale);
}

}  // namespace stream::verify
