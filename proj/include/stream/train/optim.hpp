#pragma once

// Classification loss and a decoupled-weight-decay Adam optimizer over named
// parameter tensors.

#include <cstdint>
#include <vector>

#include "stream/layer/tensor.hpp"

namespace stream::train {

struct LossResult {
  double loss = 0.0;
  layer::Vector grad;  // softmax(logits) - target
};

/// Log-sum-exp cross entropy against a soft label (nonnegative, sums to 1).
/// Throws NumericError on non-finite logits, ContractError on a bad target.
LossResult cross_entropy(const layer::Vector& logits, const layer::Vector& target);
LossResult cross_entropy(const layer::Vector& logits, std::size_t label);

layer::Vector softmax(const layer::Vector& logits);

struct AdamConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected update. Returns false and leaves everything untouched
/// when any gradient entry is non-finite.
bool adam_step(const std::vector<layer::ParamRef>& params, const std::vector<layer::ParamRef>& grads,
               AdamState& state, const AdamConfig& config);

double global_norm(const std::vector<layer::ParamRef>& grads);
/// Scales gradients so their global norm is at most `max_norm`; returns the norm before scaling.
double clip_global_norm(const std::vector<layer::ParamRef>& grads, double max_norm);

}  // namespace stream::train
