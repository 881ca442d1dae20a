#include "stream/scan/adjoint.hpp"

#include <algorithm>
#include <string>

#include "stream/common/errors.hpp"

namespace stream::scan {
namespace {

void check_shapes(const PairSequence& leaves, const ComplexRows& grads,
                  const AdjointOptions& options) {
  if (leaves.size() == 0) throw ContractError("adjoint scan needs at least one pair");
  if (grads.rows() != leaves.size() || grads.cols() != leaves.width()) {
    throw ContractError("state gradients are " + std::to_string(grads.rows()) + "x" +
                        std::to_string(grads.cols()) + ", leaves are " +
                        std::to_string(leaves.size()) + "x" + std::to_string(leaves.width()));
  }
  if (!options.h0.empty() && options.h0.size() != leaves.width()) {
    throw ContractError("initial state width does not match leaves");
  }
}

// Reverse sweep over [begin, end) given h_{begin-1} in `prev` and forward
// states of the range in `states` (row k - begin holds h_k). `lambda` carries
// conj(a_end) (.) lambda_end on entry and conj(a_begin) (.) lambda_begin on exit.
void reverse_range(const PairSequence& leaves, const ComplexRows& grads, std::size_t begin,
                   std::size_t end, std::span<const Complex> prev, const ComplexRows& states,
                   std::vector<Complex>& lambda, PairSequence& out, const StateVisitor& visit) {
  const std::size_t m = leaves.width();
  for (std::size_t k = end; k-- > begin;) {
    if (visit) visit(k, states.row(k - begin));
    const auto g = grads.row(k);
    const auto a = leaves.a.row(k);
    auto da = out.a.row(k);
    auto db = out.b.row(k);
    const std::span<const Complex> h_prev = k == begin ? prev : states.row(k - begin - 1);
    for (std::size_t j = 0; j < m; ++j) {
      const Complex lam = g[j] + lambda[j];
      db[j] = lam;
      da[j] = std::conj(h_prev[j]) * lam;
      lambda[j] = std::conj(a[j]) * lam;
    }
  }
}

}  // namespace

PairSequence adjoint_scan(const PairSequence& leaves, const ComplexRows& state_grads,
                          const AdjointOptions& options, const StateVisitor& visit) {
  check_shapes(leaves, state_grads, options);
  const std::size_t n = leaves.size();
  const std::size_t m = leaves.width();
  const std::size_t interval = std::max<std::size_t>(1, options.checkpoint_interval);
  const std::size_t chunks = (n + interval - 1) / interval;

  // checkpoints.row(c) = h_{c * interval - 1}, the state entering chunk c
  ComplexRows checkpoints(chunks, m);
  std::vector<Complex> h = options.h0.empty() ? std::vector<Complex>(m) : options.h0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k % interval == 0) std::copy(h.begin(), h.end(), checkpoints.row(k / interval).begin());
    const auto a = leaves.a.row(k);
    const auto b = leaves.b.row(k);
    for (std::size_t j = 0; j < m; ++j) h[j] = a[j] * h[j] + b[j];
  }

  PairSequence out(n, m);
  std::vector<Complex> lambda(m);
  ComplexRows states(interval, m);
  for (std::size_t c = chunks; c-- > 0;) {
    const std::size_t begin = c * interval;
    const std::size_t end = std::min(n, begin + interval);
    std::copy(checkpoints.row(c).begin(), checkpoints.row(c).end(), h.begin());
    for (std::size_t k = begin; k < end; ++k) {
      const auto a = leaves.a.row(k);
      const auto b = leaves.b.row(k);
      auto dst = states.row(k - begin);
      for (std::size_t j = 0; j < m; ++j) {
        h[j] = a[j] * h[j] + b[j];
        dst[j] = h[j];
      }
    }
    reverse_range(leaves, state_grads, begin, end, checkpoints.row(c), states, lambda, out, visit);
  }
  return out;
}

PairSequence adjoint_scan_with_states(const PairSequence& leaves, const ComplexRows& states,
                                      const ComplexRows& state_grads,
                                      const AdjointOptions& options) {
  check_shapes(leaves, state_grads, options);
  if (states.rows() != leaves.size() || states.cols() != leaves.width()) {
    throw ContractError("missing forward states: expected " + std::to_string(leaves.size()) +
                        "x" + std::to_string(leaves.width()) + ", got " +
                        std::to_string(states.rows()) + "x" + std::to_string(states.cols()));
  }
  const std::size_t m = leaves.width();
  const std::vector<Complex> h0 = options.h0.empty() ? std::vector<Complex>(m) : options.h0;
  PairSequence out(leaves.size(), m);
  std::vector<Complex> lambda(m);
  reverse_range(leaves, state_grads, 0, leaves.size(), h0, states, lambda, out, {});
  return out;
}

PairSequence make_leaves(const ssm::DiagonalMatrixA& a, std::span<const ssm::SisoStep> steps) {
  const std::size_t m = a.size();
  PairSequence leaves(steps.size(), m);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    if (s.b.size() != m) throw ContractError("step " + std::to_string(k) + ": b has wrong width");
    if (s.delta < 0.0) throw ContractError("step " + std::to_string(k) + ": negative gap");
    const auto decay = a.transition(s.delta);
    auto la = leaves.a.row(k);
    auto lb = leaves.b.row(k);
    for (std::size_t j = 0; j < m; ++j) {
      la[j] = decay[j];
      lb[j] = s.b[j] * s.u;
    }
  }
  return leaves;
}

SisoGradients siso_gradients(const ssm::DiagonalMatrixA& a, std::span<const ssm::SisoStep> steps,
                             std::span<const double> dy, const AdjointOptions& options) {
  if (steps.empty()) throw ContractError("siso_gradients needs at least one step");
  if (dy.size() != steps.size()) throw ContractError("output gradient length mismatch");
  const std::size_t n = steps.size();
  const std::size_t m = a.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (steps[k].c.size() != m) throw ContractError("step " + std::to_string(k) + ": c has wrong width");
  }
  const PairSequence leaves = make_leaves(a, steps);

  // y_k = Re(sum_j c_kj h_kj)  =>  dL/dh_k = dy_k conj(c_k),  dL/dc_k = dy_k conj(h_k)
  ComplexRows state_grads(n, m);
  for (std::size_t k = 0; k < n; ++k) {
    auto g = state_grads.row(k);
    for (std::size_t j = 0; j < m; ++j) g[j] = dy[k] * std::conj(steps[k].c[j]);
  }

  SisoGradients out;
  out.d_a.assign(m, Complex(0));
  out.d_delta.assign(n, 0.0);
  out.d_b.assign(n, ssm::ComplexVector(m));
  out.d_c.assign(n, ssm::ComplexVector(m));
  out.d_u.assign(n, 0.0);

  const PairSequence leaf_grads = adjoint_scan(
      leaves, state_grads, options, [&](std::size_t k, std::span<const Complex> h) {
        for (std::size_t j = 0; j < m; ++j) out.d_c[k][j] = dy[k] * std::conj(h[j]);
      });

  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = steps[k];
    const auto ga = leaf_grads.a.row(k);
    const auto gb = leaf_grads.b.row(k);
    const auto decay = leaves.a.row(k);
    double d_delta = 0.0;
    Complex d_u = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      // a_kj = exp(A_j delta_k)
      d_delta += (std::conj(a[j] * decay[j]) * ga[j]).real();
      out.d_a[j] += std::conj(s.delta * decay[j]) * ga[j];
      // b-leaf = b_kj u_k
      out.d_b[k][j] = s.u * gb[j];
      d_u += std::conj(s.b[j]) * gb[j];
    }
    out.d_delta[k] = d_delta;
    out.d_u[k] = d_u.real();
  }
  return out;
}

}  // namespace stream::scan
