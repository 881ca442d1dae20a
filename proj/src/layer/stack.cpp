#include "stream/layer/stack.hpp"

#include <sstream>

#include "stream/common/errors.hpp"

namespace stream::layer {

void ModelConfig::validate() const {
  if (n == 0 || m == 0) throw ConfigError("model width and state size must be positive");
  if (layers == 0) throw ConfigError("model needs at least one block");
  if (classes < 2) throw ConfigError("classifier needs at least two classes");
  if (!(typical_gap > 0.0)) throw ConfigError("typical_gap must be positive");
  if (checkpoint_interval == 0) throw ConfigError("checkpoint_interval must be positive");
  for (std::size_t i = 0; i < subsample_schedule.size(); ++i) {
    const auto& s = subsample_schedule[i];
    if (s.factor == 0) throw ConfigError("subsample factors must be at least 1");
    if (s.state_multiplier == 0) throw ConfigError("state multipliers must be at least 1");
    if (s.position > layers) throw ConfigError("subsample position beyond the last block");
    if (i > 0 && s.position <= subsample_schedule[i - 1].position) {
      throw ConfigError("subsample positions must be strictly increasing");
    }
  }
}

std::size_t ModelConfig::state_at(std::size_t block) const {
  std::size_t state = m;
  for (const auto& s : subsample_schedule) {
    if (s.position <= block) state *= s.state_multiplier;
  }
  return state;
}

std::size_t ModelConfig::total_subsample() const {
  std::size_t total = 1;
  for (const auto& s : subsample_schedule) total *= s.factor;
  return total;
}

std::string ModelConfig::schedule_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < subsample_schedule.size(); ++i) {
    const auto& s = subsample_schedule[i];
    if (i) out << ',';
    out << s.position << ':' << s.factor << ':' << s.state_multiplier;
  }
  return out.str();
}

std::vector<SubsampleStage> ModelConfig::parse_schedule(const std::string& text) {
  std::vector<SubsampleStage> stages;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    SubsampleStage s;
    char c1 = 0, c2 = 0;
    std::istringstream fields(item);
    fields >> s.position >> c1 >> s.factor;
    if (!fields || c1 != ':') throw ConfigError("bad subsample stage '" + item + "'");
    if (fields >> c2) {
      if (c2 != ':' || !(fields >> s.state_multiplier)) {
        throw ConfigError("bad subsample stage '" + item + "'");
      }
    }
    stages.push_back(s);
  }
  return stages;
}

StackModel StackModel::init(const ModelConfig& config, CounterRng& rng) {
  config.validate();
  StackModel model;
  model.config = config;
  const VariantFlags variant = make_variant(config.variant);
  for (std::size_t b = 0; b < config.layers; ++b) {
    CounterRng block_rng = rng.fork(b);
    model.blocks.push_back(StreamParams::init(config.n, config.state_at(b), variant, config.pre_norm,
                                              block_rng, {config.typical_gap}));
  }
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto classes = static_cast<Eigen::Index>(config.classes);
  model.final_gain = Vector::Ones(n);
  model.head_weight.resize(classes, n);
  CounterRng head_rng = rng.fork(config.layers);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.n));
  for (Eigen::Index i = 0; i < model.head_weight.size(); ++i) {
    model.head_weight.data()[i] = head_rng.uniform(-bound, bound);
  }
  model.head_bias = Vector::Zero(classes);
  return model;
}

StackModel StackModel::zeros_like(const StackModel& other) {
  StackModel z = other;
  z.for_each_param([](const ParamRef& r) { std::fill(r.data, r.data + r.size(), 0.0); });
  return z;
}

std::vector<std::size_t> stack_lengths(const ModelConfig& config, std::size_t length) {
  std::vector<std::size_t> lengths;
  std::size_t stage = 0;
  for (std::size_t b = 0; b <= config.layers; ++b) {
    while (stage < config.subsample_schedule.size() && config.subsample_schedule[stage].position == b) {
      length /= config.subsample_schedule[stage].factor;
      ++stage;
    }
    lengths.push_back(length);
  }
  return lengths;
}

Vector head_logits(const StackModel& model, const Vector& pooled) {
  return model.head_weight * pooled + model.head_bias;
}

Vector stack_forward(const StackModel& model, const TokenSequence& seq, const StackOptions& options,
                     StackCache* cache) {
  const ModelConfig& cfg = model.config;
  if (seq.size() < cfg.total_subsample()) {
    throw ConfigError("sequence of length " + std::to_string(seq.size()) +
                      " is shorter than the subsample product " + std::to_string(cfg.total_subsample()));
  }
  StackCache local;
  StackCache& cc = cache ? *cache : local;
  cc.block_inputs.assign(cfg.layers, {});
  cc.blocks.assign(cfg.layers, {});
  cc.stage_lengths.clear();

  const MimoOptions mimo{options.pool, cfg.checkpoint_interval};
  TokenSequence cur = seq;
  std::size_t stage = 0;
  auto apply_stages = [&](std::size_t position) {
    while (stage < cfg.subsample_schedule.size() && cfg.subsample_schedule[stage].position == position) {
      cc.stage_lengths.push_back(cur.size());
      cur = subsample(cur, cfg.subsample_schedule[stage].factor);
      ++stage;
    }
  };
  for (std::size_t b = 0; b < cfg.layers; ++b) {
    apply_stages(b);
    Matrix out = mimo_forward(model.blocks[b], cur, mimo, &cc.blocks[b]);
    cc.block_inputs[b] = std::move(cur);
    cur.t = cc.block_inputs[b].t;
    cur.segment_starts = cc.block_inputs[b].segment_starts;
    cur.features = std::move(out);
  }
  apply_stages(cfg.layers);

  cc.normed = cfg.final_norm ? rms_norm(cur.features, model.final_gain, &cc.inv_rms) : cur.features;
  cc.pooled = cc.normed.colwise().mean().transpose();
  cc.last = std::move(cur);
  return head_logits(model, cc.pooled);
}

namespace {

// Adjoint of subsample: gradient rows go back to the kept indices.
Matrix scatter_subsampled(const Matrix& d, std::size_t length, std::size_t factor) {
  Matrix full = Matrix::Zero(static_cast<Eigen::Index>(length), d.cols());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    full.row(i * static_cast<Eigen::Index>(factor) + static_cast<Eigen::Index>(factor) - 1) = d.row(i);
  }
  return full;
}

}  // namespace

Matrix stack_backward(const StackModel& model, const StackCache& cache, const Vector& d_logits,
                      StackModel& grads, const StackOptions& options) {
  const ModelConfig& cfg = model.config;
  if (cache.block_inputs.size() != cfg.layers || cache.pooled.size() == 0) {
    throw ContractError("missing forward cache for stack backward");
  }
  grads.head_weight += d_logits * cache.pooled.transpose();
  grads.head_bias += d_logits;
  const Vector d_pooled = model.head_weight.transpose() * d_logits;
  const auto rows = cache.normed.rows();
  Matrix d_normed = (d_pooled / static_cast<double>(rows)).transpose().replicate(rows, 1);
  Matrix d = cfg.final_norm ? rms_norm_backward(cache.last.features, model.final_gain, cache.inv_rms,
                                                d_normed, grads.final_gain)
                            : d_normed;

  const MimoOptions mimo{options.pool, cfg.checkpoint_interval};
  std::size_t stage = cfg.subsample_schedule.size();
  auto undo_stages = [&](std::size_t position) {
    while (stage > 0 && cfg.subsample_schedule[stage - 1].position == position) {
      --stage;
      d = scatter_subsampled(d, cache.stage_lengths[stage], cfg.subsample_schedule[stage].factor);
    }
  };
  undo_stages(cfg.layers);
  for (std::size_t b = cfg.layers; b-- > 0;) {
    d = mimo_backward(model.blocks[b], cache.block_inputs[b], cache.blocks[b], d, grads.blocks[b], mimo);
    undo_stages(b);
  }
  return d;
}

}  // namespace stream::layer
