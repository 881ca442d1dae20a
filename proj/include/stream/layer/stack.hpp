#pragma once

// Stacked blocks with strided subsampling, final normalization, mean pooling
// and a linear classifier head.

#include <cstddef>
#include <string>
#include <vector>

#include "stream/layer/stream_layer.hpp"

namespace stream::layer {

/// Subsampling applied after `position` blocks (0 = before the first block,
/// `layers` = after the last). The state size of every later block is
/// multiplied by `state_multiplier`.
struct SubsampleStage {
  std::size_t position = 0;
  std::size_t factor = 1;
  std::size_t state_multiplier = 1;

  bool operator==(const SubsampleStage&) const = default;
};

struct ModelConfig {
  std::size_t n = 16;  // feature width
  std::size_t m = 4;   // state size per channel of the first block
  std::size_t layers = 2;
  std::vector<SubsampleStage> subsample_schedule;
  AblationRow variant = AblationRow::stream_dg;
  std::size_t group_size = 32;
  std::size_t classes = 2;
  bool pre_norm = true;
  bool final_norm = true;
  double typical_gap = 1.0;
  std::size_t checkpoint_interval = 256;

  /// Throws ConfigError on inconsistent sizes or schedule.
  void validate() const;
  /// State size of block b after all earlier multipliers.
  std::size_t state_at(std::size_t block) const;
  /// Product of all subsample factors: the minimum input length.
  std::size_t total_subsample() const;
  /// Schedule as "position:factor:multiplier,..." (empty when none).
  std::string schedule_string() const;
  static std::vector<SubsampleStage> parse_schedule(const std::string& text);
};

struct StackModel {
  ModelConfig config;
  std::vector<StreamParams> blocks;
  Vector final_gain;   // n
  Matrix head_weight;  // classes x n
  Vector head_bias;    // classes

  static StackModel init(const ModelConfig& config, CounterRng& rng);
  static StackModel zeros_like(const StackModel& other);

  template <class Fn>
  void for_each_param(Fn&& fn) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b].for_each_param(fn, "block" + std::to_string(b) + ".");
    }
    fn(param_ref("final_gain", final_gain));
    fn(param_ref("head_weight", head_weight));
    fn(param_ref("head_bias", head_bias));
  }
};

struct StackCache {
  std::vector<TokenSequence> block_inputs;
  std::vector<MimoCache> blocks;
  /// Sequence lengths before each stage, in schedule order.
  std::vector<std::size_t> stage_lengths;
  TokenSequence last;  // input to the final norm
  Vector inv_rms;
  Matrix normed;
  Vector pooled;
};

struct StackOptions {
  WorkerPool* pool = nullptr;
};

/// Sequence lengths seen by each block for an input of length `length`.
std::vector<std::size_t> stack_lengths(const ModelConfig& config, std::size_t length);

/// Logits for one sequence. Throws ConfigError when the sequence is shorter than
/// the subsample product.
Vector stack_forward(const StackModel& model, const TokenSequence& seq,
                     const StackOptions& options = {}, StackCache* cache = nullptr);

/// Accumulates parameter gradients; returns dL/d(seq.features).
Matrix stack_backward(const StackModel& model, const StackCache& cache, const Vector& d_logits,
                      StackModel& grads, const StackOptions& options = {});

/// Mean-pooled head applied to already normalized rows.
Vector head_logits(const StackModel& model, const Vector& pooled);

}  // namespace stream::layer
