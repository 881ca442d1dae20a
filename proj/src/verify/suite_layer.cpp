#include "probes.hpp"
#include "stream/layer/stack.hpp"

namespace stream::verify::detail {
namespace {

using layer::AblationRow;
using layer::Matrix;

std::vector<Check> timestamps(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "layer.timestamps");
  double stream_min_change = HUGE_VAL;
  double mamba_change = 0.0;
  for (auto row : kAllRows) {
    for (int rep = 0; rep < 4; ++rep) {
      const auto p = random_params(rng, 4, 4, layer::make_variant(row), rep % 2 == 0);
      auto seq = random_sequence(rng, 48, 4);
      const Matrix before = layer::mimo_forward(p, seq, {ctx.pool});
      const double t0 = seq.t[0];
      for (auto& t : seq.t) t = t0 + 2.0 * (t - t0);
      const double change = (before - layer::mimo_forward(p, seq, {ctx.pool})).cwiseAbs().maxCoeff();
      if (row == AblationRow::mamba) {
        mamba_change = std::max(mamba_change, change);
      } else {
        stream_min_change = std::min(stream_min_change, change);
      }
    }
  }
  return {above("layer.stream_gap_sensitivity", stream_min_change, 1e-6, "min over STREAM rows, gaps x2"),
          equal("layer.mamba_gap_invariance", mamba_change, 0.0, "bitwise, gaps x2")};
}

std::vector<Check> overlap(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "layer.overlap");
  double non_finite = 0.0;
  double min_gamma = HUGE_VAL;
  double min_change = HUGE_VAL;
  for (auto row : kAllRows) {
    for (int rep = 0; rep < 4; ++rep) {
      const auto p = random_params(rng, 3, 2, layer::make_variant(row), rep % 2 == 0);
      const auto base = random_sequence(rng, 24, 3, 1.0, 0.0);
      layer::TokenSequence dup;
      dup.features.resize(48, 3);
      for (int k = 0; k < 24; ++k) {
        dup.t.push_back(base.t[k]);
        dup.t.push_back(base.t[k]);
        dup.features.row(2 * k) = base.features.row(k);
        dup.features.row(2 * k + 1) = base.features.row(k);
      }
      const Matrix out_dup = layer::mimo_forward(p, dup, {ctx.pool});
      const Matrix out_base = layer::mimo_forward(p, base, {ctx.pool});
      for (Eigen::Index i = 0; i < out_dup.size(); ++i) non_finite += !std::isfinite(out_dup.data()[i]);

      const auto disc = layer::discretize_stream(p, dup);
      for (int k = 1; k < 48; k += 2) min_gamma = std::min(min_gamma, disc.gamma.row(k).minCoeff());

      double change = 0.0;
      for (int k = 0; k < 24; ++k) {
        change = std::max(change, (out_dup.row(2 * k + 1) - out_base.row(k)).cwiseAbs().maxCoeff());
      }
      min_change = std::min(min_change, change);
    }
  }
  return {equal("layer.overlap_finite", non_finite, 0.0, "non-finite outputs with every coordinate doubled"),
          above("layer.overlap_gamma_positive", min_gamma, 0.0, "min Gamma at duplicates"),
          above("layer.overlap_duplicates_contribute", min_change, 1e-6, "removing duplicates changes the output")};
}

std::vector<Check> shapes(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "layer.shapes");
  double mismatches = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n_tok = 1 + rng.below(40);
    const auto p = random_params(rng, 4, 2, layer::make_variant(kAllRows[rng.below(5)]), rng.bernoulli(0.5));
    const Matrix out = layer::mimo_forward(p, random_sequence(rng, n_tok, 4), {ctx.pool});
    mismatches += out.rows() != static_cast<Eigen::Index>(n_tok) || out.cols() != 4;

    layer::ModelConfig config;
    config.n = 4;
    config.m = 2;
    config.layers = 1 + rng.below(3);
    config.classes = 2;
    config.variant = kAllRows[rng.below(5)];
    for (std::size_t pos = 0; pos <= config.layers; ++pos) {
      if (rng.bernoulli(0.4)) config.subsample_schedule.push_back({pos, 1 + rng.below(4), 1 + rng.below(2)});
    }
    const std::size_t length = config.total_subsample() + rng.below(60);
    const auto model = layer::StackModel::init(config, rng);
    layer::StackCache cache;
    layer::stack_forward(model, random_sequence(rng, length, 4), {ctx.pool}, &cache);
    // block b sees floor(length / product of the factors placed at positions <= b)
    for (std::size_t b = 0; b <= config.layers; ++b) {
      std::size_t product = 1;
      for (const auto& s : config.subsample_schedule) product *= s.position <= b ? s.factor : 1;
      const std::size_t seen = b < config.layers ? cache.block_inputs[b].size() : cache.last.size();
      mismatches += seen != length / product;
    }
  }
  return {equal("layer.shape_contract", mismatches, 0.0, "block and stack lengths vs the schedule")};
}

std::vector<Check> streaming(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "layer.streaming");
  double worst = 0.0;
  for (auto row : {AblationRow::mamba, AblationRow::stream_dg}) {
    layer::ModelConfig config;
    config.n = 8;
    config.m = 4;
    config.layers = 2;
    config.subsample_schedule = {{0, 2, 1}, {1, 4, 2}};
    config.variant = row;
    config.classes = 3;
    auto model = layer::EventModel::init(config, 4, 4, rng);
    perturb(model.stack, rng);
    const auto tokens = random_tokens(rng, 160, model.vocab());
    layer::StreamingClassifier stream(model);
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      stream.push(tokens.ids[k], tokens.t[k]);
      if ((k + 1) % 8 == 0) {
        layer::EventTokens prefix{{tokens.ids.begin(), tokens.ids.begin() + k + 1},
                                  {tokens.t.begin(), tokens.t.begin() + k + 1}};
        const layer::Vector batch = layer::event_forward(model, prefix, {ctx.pool});
        worst = std::max(worst, (*stream.logits() - batch).cwiseAbs().maxCoeff());
      }
    }
  }
  return {at_most("layer.streaming_matches_batch", worst, 1e-9, "logits at aligned prefixes")};
}

}  // namespace

void add_layer_probes(std::vector<Probe>& out) {
  out.push_back({"layer", "timestamps", {"layer.stream_gap_sensitivity", "layer.mamba_gap_invariance"}, timestamps});
  out.push_back({"layer", "overlap",
                 {"layer.overlap_finite", "layer.overlap_gamma_positive", "layer.overlap_duplicates_contribute"},
                 overlap});
  out.push_back({"layer", "shapes", {"layer.shape_contract"}, shapes});
  out.push_back({"layer", "streaming", {"layer.streaming_matches_batch"}, streaming});
}

}  // namespace stream::verify::detail
