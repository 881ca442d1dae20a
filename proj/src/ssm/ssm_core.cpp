#include "stream/ssm/ssm_core.hpp"

#include <cmath>
#include <string>

#include "stream/common/errors.hpp"
#include "stream/common/math.hpp"

namespace stream::ssm {
namespace {

bool finite(const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

void check_step(const DiagonalMatrixA& a, const SisoStep& s, std::size_t index) {
  const std::size_t m = a.size();
  if (s.b.size() != m || s.c.size() != m) {
    throw ContractError("step " + std::to_string(index) + ": b/c have " +
                        std::to_string(s.b.size()) + "/" + std::to_string(s.c.size()) +
                        " entries, state dimension is " + std::to_string(m));
  }
  if (!std::isfinite(s.delta) || !std::isfinite(s.u)) {
    throw NumericError("non-finite delta or input", index);
  }
  if (s.delta < 0.0) {
    throw ContractError("step " + std::to_string(index) + ": negative gap " +
                        std::to_string(s.delta));
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!finite(s.b[j]) || !finite(s.c[j])) throw NumericError("non-finite b or c", index);
  }
}

void advance(ComplexVector& h, const DiagonalMatrixA& a, const SisoStep& s) {
  for (std::size_t j = 0; j < h.size(); ++j) {
    const Complex decay = s.delta == 0.0 ? Complex(1.0) : std::exp(a[j] * s.delta);
    h[j] = decay * h[j] + s.b[j] * s.u;
  }
}

double readout(const ComplexVector& c, const ComplexVector& h) {
  Complex acc = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) acc += c[j] * h[j];
  return acc.real();
}

void check_state(const DiagonalMatrixA& a, const SisoState& h0) {
  if (h0.h.size() != a.size()) {
    throw ContractError("initial state has " + std::to_string(h0.h.size()) +
                        " entries, state dimension is " + std::to_string(a.size()));
  }
}

}  // namespace

DiagonalMatrixA::DiagonalMatrixA(ComplexVector entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ContractError("state dimension must be at least 1");
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    if (!finite(entries_[j])) throw NumericError("non-finite A entry", j);
    if (entries_[j].real() > 0.0) {
      throw ContractError("A entry " + std::to_string(j) + " has positive real part");
    }
  }
}

DiagonalMatrixA DiagonalMatrixA::from_raw(std::span<const double> raw_decay,
                                          std::span<const double> imag) {
  if (raw_decay.size() != imag.size()) throw ContractError("raw A parts differ in length");
  ComplexVector entries(raw_decay.size());
  for (std::size_t j = 0; j < entries.size(); ++j) {
    entries[j] = Complex(-softplus(raw_decay[j]), imag[j]);
  }
  return DiagonalMatrixA(std::move(entries));
}

ComplexVector DiagonalMatrixA::transition(double delta) const {
  ComplexVector out(entries_.size(), Complex(1.0));
  if (delta == 0.0) return out;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::exp(entries_[j] * delta);
  return out;
}

SisoState step(const SisoState& state, const DiagonalMatrixA& a, const SisoStep& s) {
  check_state(a, state);
  check_step(a, s, 0);
  SisoState next = state;
  advance(next.h, a, s);
  return next;
}

std::vector<double> run_sequential(const DiagonalMatrixA& a, std::span<const SisoStep> steps) {
  return run_sequential(a, steps, SisoState::zero(a.size()));
}

std::vector<double> run_sequential(const DiagonalMatrixA& a, std::span<const SisoStep> steps,
                                   const SisoState& h0) {
  if (steps.empty()) throw ContractError("run_sequential needs at least one step");
  check_state(a, h0);
  std::vector<double> y(steps.size());
  ComplexVector h = h0.h;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    check_step(a, steps[k], k);
    advance(h, a, steps[k]);
    y[k] = readout(steps[k].c, h);
    if (!std::isfinite(y[k])) throw NumericError("non-finite output", k);
  }
  return y;
}

std::vector<SisoState> run_states(const DiagonalMatrixA& a, std::span<const SisoStep> steps,
                                  const SisoState& h0) {
  if (steps.empty()) throw ContractError("run_states needs at least one step");
  check_state(a, h0);
  std::vector<SisoState> out;
  out.reserve(steps.size());
  ComplexVector h = h0.h;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    check_step(a, steps[k], k);
    advance(h, a, steps[k]);
    out.push_back(SisoState{h});
  }
  return out;
}

double kernel_value(const DiagonalMatrixA& a, std::span<const SisoStep> steps, std::size_t k,
                    std::size_t i) {
  if (k >= steps.size()) throw ContractError("kernel index k out of range");
  if (i > k) {
    throw OrderError("kernel is causal: source index " + std::to_string(i) +
                     " is after target index " + std::to_string(k));
  }
  check_step(a, steps[k], k);
  check_step(a, steps[i], i);
  double gap = 0.0;
  for (std::size_t j = i + 1; j <= k; ++j) gap += steps[j].delta;
  Complex acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    acc += steps[k].c[j] * std::exp(a[j] * gap) * steps[i].b[j];
  }
  return acc.real();
}

std::vector<double> apply_kernel_oracle(const DiagonalMatrixA& a, std::span<const SisoStep> steps) {
  if (steps.empty()) throw ContractError("apply_kernel_oracle needs at least one step");
  for (std::size_t k = 0; k < steps.size(); ++k) check_step(a, steps[k], k);
  std::vector<double> y(steps.size(), 0.0);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    double gap = 0.0;
    double acc = 0.0;
    // walk sources backwards from k so the gap sum is built incrementally
    for (std::size_t i = k + 1; i-- > 0;) {
      if (i < k) gap += steps[i + 1].delta;
      Complex phi = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        phi += steps[k].c[j] * std::exp(a[j] * gap) * steps[i].b[j];
      }
      acc += phi.real() * steps[i].u;
    }
    y[k] = acc;
  }
  return y;
}

}  // namespace stream::ssm
