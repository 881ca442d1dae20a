#include "probes.hpp"
#include "stream/layer/checkpoint.hpp"
#include "stream/train/gap_task.hpp"
#include "stream/train/trainer.hpp"

namespace stream::verify::detail {
namespace {

// Two runs of a small configuration that exercises every random draw,
// including augmentation and cutmix.
std::vector<Check> determinism(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "train.determinism");
  train::GapTaskConfig task;
  task.train = 160;
  task.val = 40;
  task.min_events = 64;
  task.max_events = 96;
  CounterRng data_rng = rng.fork(0);
  const auto data = train::make_gap_task(data_rng, task);

  train::TrainConfig config;
  config.epochs = 2;
  config.seed = rng.next_u64();
  config.augment = true;
  config.cutmix_prob = 0.2;
  const auto model_config = train::toy_model_config(layer::AblationRow::stream_dg);
  const train::TrainHooks hooks{ctx.pool, {}};
  const auto first = train::train_toy(model_config, config, data, hooks);
  const auto second = train::train_toy(model_config, config, data, hooks);

  double differing = first.history.size() == second.history.size() ? 0.0 : 1.0;
  for (std::size_t i = 0; i < std::min(first.history.size(), second.history.size()); ++i) {
    differing += !train::same_metrics({first.history[i]}, {second.history[i]});
  }
  return {equal("train.deterministic_metrics", differing, 0.0, "records differing between two runs")};
}

// Five epochs of the toy task at its default settings.
std::vector<Check> toy_task(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "train.toy_task");
  train::GapTaskConfig task;
  task.val = 40;
  CounterRng data_rng = rng.fork(0);
  const auto data = train::make_gap_task(data_rng, task);

  train::TrainConfig config;
  config.epochs = 5;
  config.seed = rng.next_u64();
  const auto result =
      train::train_toy(train::toy_model_config(layer::AblationRow::stream_dg), config, data, {ctx.pool, {}});

  // two-epoch moving average of the training loss must not increase
  std::vector<double> loss;
  for (const auto& m : result.history) {
    if (m.split == "train") loss.push_back(m.loss);
  }
  double worst_rise = -HUGE_VAL;
  for (std::size_t e = 2; e < loss.size(); ++e) {
    worst_rise = std::max(worst_rise, (loss[e] + loss[e - 1]) - (loss[e - 1] + loss[e - 2]));
  }

  const auto reloaded = layer::decode_checkpoint(layer::encode_checkpoint(result.model));
  double logit_diff = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto tokens = geometry::tokenize_events(data.val[i].stream);
    logit_diff = std::max(logit_diff, (layer::event_forward(reloaded, tokens) -
                                       layer::event_forward(result.model, tokens)).cwiseAbs().maxCoeff());
  }
  return {at_most("train.loss_decreases", worst_rise, 0.0, "rise of the smoothed loss over 5 epochs"),
          equal("train.checkpoint_round_trip", logit_diff, 0.0, "max logit change after save and load")};
}

}  // namespace

void add_train_probes(std::vector<Probe>& out) {
  out.push_back({"train", "determinism", {"train.deterministic_metrics"}, determinism});
  out.push_back({"train", "toy_task", {"train.loss_decreases", "train.checkpoint_round_trip"}, toy_task});
}

}  // namespace stream::verify::detail
