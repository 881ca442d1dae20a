#pragma once

// Shared instance builders and the per-suite probe lists.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stream/common/rng.hpp"
#include "stream/layer/event_model.hpp"
#include "stream/layer/stream_layer.hpp"
#include "stream/verify/suites.hpp"

namespace stream::verify::detail {

void add_ssm_probes(std::vector<Probe>& out);
void add_scan_probes(std::vector<Probe>& out);
void add_grad_probes(std::vector<Probe>& out);
void add_layer_probes(std::vector<Probe>& out);
void add_geometry_probes(std::vector<Probe>& out);
void add_train_probes(std::vector<Probe>& out);

/// Independent rng stream for a probe: the seed forked by a hash of the name.
CounterRng probe_rng(const SuiteContext& context, const std::string& name);

inline Check at_most(std::string id, double measured, double bound, std::string detail = {}) {
  return {std::move(id), measured, Relation::at_most, bound, std::move(detail)};
}

inline Check above(std::string id, double measured, double bound, std::string detail = {}) {
  return {std::move(id), measured, Relation::above, bound, std::move(detail)};
}

inline Check equal(std::string id, double measured, double expected, std::string detail = {}) {
  return {std::move(id), measured, Relation::equal, expected, std::move(detail)};
}

/// Irregular coordinates with roughly `dup_share` exact duplicates.
layer::TokenSequence random_sequence(CounterRng& rng, std::size_t n_tok, std::size_t width,
                                     double max_gap = 1.0, double dup_share = 0.15);

/// Initialized parameters plus uniform noise so nothing sits at a symmetric point.
layer::StreamParams random_params(CounterRng& rng, std::size_t n, std::size_t m,
                                  layer::VariantFlags variant, bool pre_norm);

layer::Matrix random_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols);

layer::EventTokens random_tokens(CounterRng& rng, std::size_t n_tok, std::size_t vocab);

void perturb(layer::StackModel& model, CounterRng& rng, double scale = 0.2);

inline constexpr layer::AblationRow kAllRows[] = {
    layer::AblationRow::mamba, layer::AblationRow::stream_00, layer::AblationRow::stream_0g,
    layer::AblationRow::stream_d0, layer::AblationRow::stream_dg};

}  // namespace stream::verify::detail
