#pragma once

// STREAM and Mamba parameterizations of a diagonal selective SSM, wrapped into a
// multi-input multi-output block:
//
//   r = rmsnorm(z) * gain          (optional pre-norm)
//   x = W_in r + b_in              (n SSM channels)
//   per channel c, state m:  h_k = exp(A_c Delta_kc) h_{k-1} + Gamma_kc (W_B x_k) x_kc
//                            y_kc = Re(sum_j (W_C x_k)_j h_kj)
//   out = z + W_out y + b_out
//
// Delta and Gamma depend on the variant flags:
//   use_timestamps, no Delta-linear:  Delta_kc = (t_k - t_{k-1}) softplus(delta_c)
//   use_timestamps, Delta-linear:     Delta_kc = (t_k - t_{k-1}) softplus((W_dt x_k + b_dt)_c)
//   no timestamps,  Delta-linear:     Delta_kc = softplus((W_dt x_k + b_dt)_c)
//   no timestamps,  no Delta-linear:  Delta_kc = softplus(delta_c)
//   Gamma-linear with timestamps:     Gamma_kc = softplus((W_g x_k + b_g)_c)
//   Gamma-linear without timestamps:  Gamma_kc = Delta_kc   (B_k = Delta_k Linear(u_k))
//   no Gamma-linear:                  Gamma_kc = 1
// The gap is zero for the first token and at every segment start.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stream/common/rng.hpp"
#include "stream/common/worker_pool.hpp"
#include "stream/layer/tensor.hpp"
#include "stream/ssm/ssm_core.hpp"

namespace stream::layer {

struct VariantFlags {
  bool use_timestamps = true;
  bool delta_softplus_linear = false;
  bool gamma_softplus_linear = true;

  bool operator==(const VariantFlags&) const = default;
};

/// Rows of the Mamba-vs-STREAM ablation.
enum class AblationRow { mamba, stream_00, stream_0g, stream_d0, stream_dg };

VariantFlags make_variant(AblationRow row);
/// Accepts "mamba", "stream-00", "stream-0g", "stream-d0", "stream-dg"; throws ConfigError otherwise.
AblationRow parse_ablation_row(std::string_view name);
std::string_view to_string(AblationRow row);

/// Ordered coordinates with one feature row per token. Coordinates are
/// nondecreasing within each segment; the gap is reset at segment starts.
struct TokenSequence {
  std::vector<double> t;
  Matrix features;
  /// Sorted indices where a new segment begins. Index 0 always starts one.
  std::vector<std::size_t> segment_starts;

  std::size_t size() const { return t.size(); }
  bool starts_segment(std::size_t k) const;
  /// t_k - t_{k-1}, or 0 at k == 0 and at segment starts.
  std::vector<double> gaps() const;
  /// Throws ContractError on shape mismatch, OrderError on decreasing coordinates.
  void validate() const;
};

/// Keeps every `factor`-th token (indices factor-1, 2*factor-1, ...) with its
/// coordinate. A kept token starts a segment if any token since the previous
/// kept one did.
TokenSequence subsample(const TokenSequence& seq, std::size_t factor);

struct InitOptions {
  /// Typical coordinate gap, used to place softplus(delta) * gap in [0.01, 1].
  double typical_gap = 1.0;
};

struct StreamParams {
  std::size_t width = 0;  // n
  std::size_t state = 0;  // m
  VariantFlags variant;
  bool pre_norm = true;

  Vector norm_gain;     // n
  Matrix in_weight;     // n x n
  Vector in_bias;       // n
  Matrix a_decay_raw;   // n x m, Re(A) = -softplus(raw)
  Matrix a_imag;        // n x m
  Vector delta_raw;     // n
  Matrix b_weight;      // m x n
  Matrix c_weight;      // m x n
  Matrix gamma_weight;  // n x n
  Vector gamma_bias;    // n
  Matrix dt_weight;     // n x n
  Vector dt_bias;       // n
  Matrix out_weight;    // n x n
  Vector out_bias;      // n

  static StreamParams init(std::size_t width, std::size_t state, VariantFlags variant,
                           bool pre_norm, CounterRng& rng, const InitOptions& options = {});
  /// Same shapes and flags, all values zero (gradient accumulator).
  static StreamParams zeros_like(const StreamParams& other);

  ssm::DiagonalMatrixA channel_a(std::size_t c) const;

  template <class Fn>
  void for_each_param(Fn&& fn, const std::string& prefix = "") {
    fn(param_ref(prefix + "norm_gain", norm_gain));
    fn(param_ref(prefix + "in_weight", in_weight));
    fn(param_ref(prefix + "in_bias", in_bias));
    fn(param_ref(prefix + "a_decay_raw", a_decay_raw));
    fn(param_ref(prefix + "a_imag", a_imag));
    fn(param_ref(prefix + "delta_raw", delta_raw));
    fn(param_ref(prefix + "b_weight", b_weight));
    fn(param_ref(prefix + "c_weight", c_weight));
    fn(param_ref(prefix + "gamma_weight", gamma_weight));
    fn(param_ref(prefix + "gamma_bias", gamma_bias));
    fn(param_ref(prefix + "dt_weight", dt_weight));
    fn(param_ref(prefix + "dt_bias", dt_bias));
    fn(param_ref(prefix + "out_weight", out_weight));
    fn(param_ref(prefix + "out_bias", out_bias));
  }
};

/// Per-token SSM inputs for all channels.
struct Discretization {
  Matrix delta;       // N x n
  Matrix gamma;       // N x n
  Matrix b;           // N x m, W_B u_k (multiplied by Gamma_kc u_kc per channel)
  Matrix c;           // N x m
  Matrix dt_pre;      // N x n, W_dt u + b_dt (empty when unused)
  Matrix gamma_pre;   // N x n, W_g u + b_g (empty when unused)
  std::vector<double> gaps;
};

/// `seq.features` are the SSM inputs u_k (width n).
Discretization discretize_stream(const StreamParams& params, const TokenSequence& seq);

struct MimoCache {
  Vector inv_rms;  // N
  Matrix normed;   // N x n, input to W_in
  Matrix x;        // N x n, SSM inputs
  Discretization disc;
  Matrix y;        // N x n, SSM outputs
};

struct MimoOptions {
  WorkerPool* pool = nullptr;  // channels run in parallel when set
  std::size_t checkpoint_interval = 256;
};

/// Block forward; output has the same shape as seq.features.
Matrix mimo_forward(const StreamParams& params, const TokenSequence& seq,
                    const MimoOptions& options = {}, MimoCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and returns dL/d(seq.features).
Matrix mimo_backward(const StreamParams& params, const TokenSequence& seq, const MimoCache& cache,
                     const Matrix& d_out, StreamParams& grads, const MimoOptions& options = {});

/// Recurrent single-token evaluation of one block with carried state.
class BlockStepper {
 public:
  explicit BlockStepper(const StreamParams& params);

  /// Consumes one token; `segment_start` forces a zero gap. Returns the block output.
  const Vector& step(double t, const Eigen::Ref<const Vector>& z, bool segment_start = false);
  void reset();

 private:
  const StreamParams* params_;
  std::vector<ssm::Complex> h_;  // n x m
  std::vector<ssm::Complex> a_;  // n x m, A entries
  double last_t_ = 0.0;
  bool started_ = false;
  Vector normed_, x_, b_, c_, y_, out_;
};

/// RMS normalization helpers shared by the block and the classifier head.
constexpr double kRmsEps = 1e-6;
Matrix rms_norm(const Matrix& z, const Vector& gain, Vector* inv_rms);
/// Returns dL/dz; accumulates dL/dgain.
Matrix rms_norm_backward(const Matrix& z, const Vector& gain, const Vector& inv_rms,
                         const Matrix& d_normed, Vector& d_gain);

}  // namespace stream::layer
