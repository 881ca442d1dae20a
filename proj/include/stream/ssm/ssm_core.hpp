#pragma once

// Single-input single-output linear SSM driven by Dirac pulses at irregular
// coordinates t_0 <= t_1 <= ... <= t_N:
//
//   h_k = exp(A * delta_k) (.) h_{k-1} + b_k * u_k,     y_k = Re(sum_j c_kj h_kj)
//
// with delta_k = t_k - t_{k-1} and A diagonal (stored as its m complex entries).

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace stream::ssm {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Diagonal state matrix. Every entry satisfies Re(a) <= 0, so |exp(a * delta)| <= 1
/// for delta >= 0.
class DiagonalMatrixA {
 public:
  explicit DiagonalMatrixA(ComplexVector entries);

  /// Stable parameterization: Re(a_j) = -softplus(raw_decay_j), Im(a_j) = imag_j.
  static DiagonalMatrixA from_raw(std::span<const double> raw_decay, std::span<const double> imag);

  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const Complex> entries() const noexcept { return entries_; }
  const Complex& operator[](std::size_t j) const { return entries_[j]; }

  /// Elementwise exp(A * delta). delta == 0 gives exactly 1 in every entry.
  ComplexVector transition(double delta) const;

 private:
  ComplexVector entries_;
};

struct SisoStep {
  double delta = 0.0;
  ComplexVector b;
  ComplexVector c;
  double u = 0.0;
};

struct SisoState {
  ComplexVector h;

  static SisoState zero(std::size_t m) { return SisoState{ComplexVector(m)}; }
};

/// One recurrence step h' = exp(A delta) (.) h + b u.
SisoState step(const SisoState& state, const DiagonalMatrixA& a, const SisoStep& s);

/// Sequential O(N) evaluation of y_0..y_N. h0 defaults to zero.
std::vector<double> run_sequential(const DiagonalMatrixA& a, std::span<const SisoStep> steps);
std::vector<double> run_sequential(const DiagonalMatrixA& a, std::span<const SisoStep> steps,
                                   const SisoState& h0);

/// Same recurrence, returning every state h_0..h_N instead of the readout.
std::vector<SisoState> run_states(const DiagonalMatrixA& a, std::span<const SisoStep> steps,
                                  const SisoState& h0);

/// Interaction kernel Phi(t_k, t_i) = Re(c_k . exp(A * (t_k - t_i)) . b_i) for i <= k.
/// The gap is accumulated as delta_{i+1} + ... + delta_k; i == k gives Re(c_k . b_i).
double kernel_value(const DiagonalMatrixA& a, std::span<const SisoStep> steps, std::size_t k,
                    std::size_t i);

/// Brute-force O(N^2) evaluation y_k = sum_{i<=k} Phi(t_k, t_i) u_i, zero initial state.
std::vector<double> apply_kernel_oracle(const DiagonalMatrixA& a, std::span<const SisoStep> steps);

}  // namespace stream::ssm
