#include "probes.hpp"

namespace stream::verify::detail {

layer::TokenSequence random_sequence(CounterRng& rng, std::size_t n_tok, std::size_t width,
                                     double max_gap, double dup_share) {
  layer::TokenSequence seq;
  seq.t.resize(n_tok);
  seq.features.resize(static_cast<Eigen::Index>(n_tok), static_cast<Eigen::Index>(width));
  double t = rng.uniform(0.0, 5.0);
  for (std::size_t k = 0; k < n_tok; ++k) {
    if (k > 0 && !rng.bernoulli(dup_share)) t += rng.uniform(0.0, max_gap);
    seq.t[k] = t;
    for (std::size_t c = 0; c < width; ++c) seq.features(k, c) = rng.uniform(-1.0, 1.0);
  }
  return seq;
}

layer::StreamParams random_params(CounterRng& rng, std::size_t n, std::size_t m,
                                  layer::VariantFlags variant, bool pre_norm) {
  auto p = layer::StreamParams::init(n, m, variant, pre_norm, rng);
  p.for_each_param([&](const layer::ParamRef& r) {
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] += rng.uniform(-0.2, 0.2);
  });
  return p;
}

layer::Matrix random_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols) {
  layer::Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
  return w;
}

layer::EventTokens random_tokens(CounterRng& rng, std::size_t n_tok, std::size_t vocab) {
  layer::EventTokens tokens;
  double t = 0.0;
  for (std::size_t k = 0; k < n_tok; ++k) {
    t += rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 2e-3);
    tokens.ids.push_back(static_cast<std::uint32_t>(rng.below(vocab)));
    tokens.t.push_back(t);
  }
  return tokens;
}

void perturb(layer::StackModel& model, CounterRng& rng, double scale) {
  model.for_each_param([&](const layer::ParamRef& r) {
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] += rng.uniform(-scale, scale);
  });
}

}  // namespace stream::verify::detail
