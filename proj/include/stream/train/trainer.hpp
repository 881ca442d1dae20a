#pragma once

// Training loop for event classifiers: augmentation, forward, cross entropy,
// adjoint backward, clipping and Adam, with per-epoch metrics.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "stream/common/worker_pool.hpp"
#include "stream/geometry/events.hpp"
#include "stream/layer/event_model.hpp"
#include "stream/train/gap_task.hpp"
#include "stream/train/optim.hpp"

namespace stream::train {

struct TrainConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  std::size_t batch = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;
  std::size_t warmup_steps = 0;
  bool augment = false;
  geometry::AugmentConfig augmentation;
  double cutmix_prob = 0.0;

  /// Throws ConfigError unless lr >= 0, batch >= 1 and the betas lie in [0, 1).
  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  double accuracy = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  layer::EventModel model;
  std::vector<EpochMetrics> history;
  std::size_t skipped_steps = 0;

  double final_val_accuracy() const;
};

/// Thrown when the loss becomes non-finite; the message carries a diagnostic dump.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainHooks {
  WorkerPool* pool = nullptr;
  /// Called after every epoch with the metrics of that epoch.
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Trains a fresh model (initialized from config.seed) on the dataset.
TrainResult train_toy(const layer::ModelConfig& model_config, const TrainConfig& config,
                      const Dataset& data, const TrainHooks& hooks = {});

/// Loss and accuracy of a model on samples, without updates.
EpochMetrics evaluate(const layer::EventModel& model, const std::vector<Sample>& samples,
                      const layer::StackOptions& options = {});

/// One "epoch=E split=S loss=L accuracy=A wall_seconds=W" line per record.
void write_metrics(std::ostream& out, const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> read_metrics(std::istream& in);
/// Equal in everything but wall time, bit for bit.
bool same_metrics(const std::vector<EpochMetrics>& a, const std::vector<EpochMetrics>& b);

/// Toy classifier used for the gap task: n=16, m=4, two blocks, subsample 8
/// after the first block with the state doubled.
layer::ModelConfig toy_model_config(layer::AblationRow variant);

}  // namespace stream::train
