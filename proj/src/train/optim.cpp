#include "stream/train/optim.hpp"

#include <cmath>

#include "stream/common/errors.hpp"

namespace stream::train {

layer::Vector softmax(const layer::Vector& logits) {
  const double top = logits.maxCoeff();
  layer::Vector e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

LossResult cross_entropy(const layer::Vector& logits, const layer::Vector& target) {
  if (logits.size() == 0 || logits.size() != target.size()) {
    throw ContractError("logits and target differ in size");
  }
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw NumericError("non-finite logit", static_cast<std::size_t>(i));
    if (!(target[i] >= 0.0)) throw ContractError("negative target weight");
  }
  if (std::abs(target.sum() - 1.0) > 1e-9) throw ContractError("target weights must sum to 1");
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  LossResult r;
  r.loss = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (target[i] > 0.0) r.loss += target[i] * (lse - logits[i]);
  }
  r.grad = softmax(logits) - target;
  return r;
}

LossResult cross_entropy(const layer::Vector& logits, std::size_t label) {
  if (label >= static_cast<std::size_t>(logits.size())) throw ContractError("label out of range");
  layer::Vector target = layer::Vector::Zero(logits.size());
  target[static_cast<Eigen::Index>(label)] = 1.0;
  return cross_entropy(logits, target);
}

bool adam_step(const std::vector<layer::ParamRef>& params, const std::vector<layer::ParamRef>& grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw ContractError("parameter and gradient lists differ");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size()) throw ContractError("gradient shape mismatch for " + params[t].name);
    for (std::size_t i = 0; i < grads[t].size(); ++i) {
      if (!std::isfinite(grads[t].data[i])) return false;
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double g = grads[t].data[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      double& p = params[t].data[i];
      p -= config.lr * config.weight_decay * p;
      p -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
    }
  }
  return true;
}

double global_norm(const std::vector<layer::ParamRef>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (std::size_t i = 0; i < g.size(); ++i) sq += g.data[i] * g.data[i];
  }
  return std::sqrt(sq);
}

double clip_global_norm(const std::vector<layer::ParamRef>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double scale = max_norm / norm;
    for (const auto& g : grads) {
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= scale;
    }
  }
  return norm;
}

}  // namespace stream::train
