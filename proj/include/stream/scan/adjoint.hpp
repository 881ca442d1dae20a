#pragma once

// Reverse-mode gradients of the diagonal recurrence h_k = a_k (.) h_{k-1} + b_k.
//
// Complex gradients use the convention g = dL/dRe(z) + i dL/dIm(z) for a real
// loss L. With lambda_k = dL/dh_k accumulated through later steps,
//
//   lambda_k = g_k + conj(a_{k+1}) (.) lambda_{k+1},
//   dL/db_k  = lambda_k,     dL/da_k = conj(h_{k-1}) (.) lambda_k.
//
// Forward states are not stored: the forward pass keeps one checkpoint per
// `checkpoint_interval` steps and recomputes each chunk during the reverse sweep.

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "stream/scan/scan.hpp"
#include "stream/ssm/ssm_core.hpp"

namespace stream::scan {

using Complex = std::complex<double>;

struct AdjointOptions {
  std::size_t checkpoint_interval = 256;
  /// Initial state h_{-1}; empty means zero.
  std::vector<Complex> h0;
};

/// Called once per step with the recomputed forward state, in decreasing k.
using StateVisitor = std::function<void(std::size_t k, std::span<const Complex> h_k)>;

/// Leaf gradients: result.a.row(k) = dL/da_k, result.b.row(k) = dL/db_k.
/// `state_grads` holds g_k = dL/dh_k from the direct (output) dependence only.
PairSequence adjoint_scan(const PairSequence& leaves, const ComplexRows& state_grads,
                          const AdjointOptions& options = {}, const StateVisitor& visit = {});

/// Same, using caller-provided forward states h_0..h_N instead of recomputation.
PairSequence adjoint_scan_with_states(const PairSequence& leaves, const ComplexRows& states,
                                      const ComplexRows& state_grads,
                                      const AdjointOptions& options = {});

/// Gradients of L = sum_k dy_k * y_k for the SISO recurrence of ssm_core.
struct SisoGradients {
  ssm::ComplexVector d_a;                  // dL/dA_j
  std::vector<double> d_delta;             // dL/ddelta_k
  std::vector<ssm::ComplexVector> d_b;     // dL/db_k
  std::vector<ssm::ComplexVector> d_c;     // dL/dc_k
  std::vector<double> d_u;                 // dL/du_k
};

/// Builds the leaves [exp(A delta_k), b_k u_k] of a SISO run.
PairSequence make_leaves(const ssm::DiagonalMatrixA& a, std::span<const ssm::SisoStep> steps);

SisoGradients siso_gradients(const ssm::DiagonalMatrixA& a, std::span<const ssm::SisoStep> steps,
                             std::span<const double> dy, const AdjointOptions& options = {});

}  // namespace stream::scan
