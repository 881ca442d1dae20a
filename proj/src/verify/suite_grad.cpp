#include <map>

#include "probes.hpp"
#include "stream/layer/stack.hpp"
#include "stream/scan/adjoint.hpp"
#include "stream/verify/gradcheck.hpp"
#include "stream/verify/instances.hpp"

namespace stream::verify::detail {
namespace {

struct Pairs {
  std::vector<double> adjoint, reference;
  void add(double a, double r) { adjoint.push_back(a), reference.push_back(r); }
  double error() const { return gradient_error(adjoint, reference); }
  double scale() const {
    double s = 0.0;
    for (double r : reference) s = std::max(s, std::abs(r));
    return s;
  }
  /// Floor taken from the gradient scale of the whole instance, so a class whose
  /// entries are all tiny is not judged on finite-difference rounding alone.
  double error(double instance_scale) const {
    return gradient_error_abs_floor(adjoint, reference, 1e-3 * instance_scale);
  }
};

std::vector<Check> siso(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "grad.siso");
  double err_a = 0.0, err_delta = 0.0, err_b = 0.0, err_c = 0.0, err_u = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(3);
    const std::size_t n = 4 + rng.below(20);
    const auto a0 = random_stable_a(rng, m);
    ssm::ComplexVector entries(a0.entries().begin(), a0.entries().end());
    auto steps = random_steps(rng, n, m);
    for (std::size_t k = 1; k < n; ++k) steps[k].delta = rng.uniform(0.05, 1.0);
    std::vector<double> dy(n);
    for (auto& v : dy) v = rng.uniform(-1, 1);
    auto loss = [&] {
      const auto y = ssm::run_sequential(ssm::DiagonalMatrixA(entries), steps);
      double l = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) l += dy[k] * y[k];
      return l;
    };
    scan::AdjointOptions opts;
    opts.checkpoint_interval = 1 + rng.below(8);
    const auto g = scan::siso_gradients(ssm::DiagonalMatrixA(entries), steps, dy, opts);

    // complex entries are probed through their real and imaginary parts
    auto probe_complex = [&](Pairs& out, std::complex<double>& z, std::complex<double> grad) {
      double re = z.real(), im = z.imag();
      out.add(grad.real(), central_difference(re, [&] { z = {re, im}; return loss(); }));
      z = {re, im};
      out.add(grad.imag(), central_difference(im, [&] { z = {re, im}; return loss(); }));
      z = {re, im};
    };
    Pairs pa, pd, pb, pc, pu;
    for (std::size_t j = 0; j < m; ++j) probe_complex(pa, entries[j], g.d_a[j]);
    for (std::size_t k = 1; k < n; ++k) pd.add(g.d_delta[k], central_difference(steps[k].delta, loss));
    for (std::size_t k = 0; k < n; ++k) {
      pu.add(g.d_u[k], central_difference(steps[k].u, loss));
      for (std::size_t j = 0; j < m; ++j) {
        probe_complex(pb, steps[k].b[j], g.d_b[k][j]);
        probe_complex(pc, steps[k].c[j], g.d_c[k][j]);
      }
    }
    err_a = std::max(err_a, pa.error());
    err_delta = std::max(err_delta, pd.error());
    err_b = std::max(err_b, pb.error());
    err_c = std::max(err_c, pc.error());
    err_u = std::max(err_u, pu.error());
  }
  const std::string note = "20 instances, central differences";
  return {at_most("grad.siso_a", err_a, 1e-5, note), at_most("grad.siso_delta", err_delta, 1e-5, note),
          at_most("grad.siso_b", err_b, 1e-5, note), at_most("grad.siso_c", err_c, 1e-5, note),
          at_most("grad.siso_u", err_u, 1e-5, note)};
}

std::string block_class(const std::string& name) {
  static const std::map<std::string, std::string> classes = {
      {"a_decay_raw", "a"},          {"a_imag", "a"},           {"delta_raw", "delta"},
      {"dt_weight", "delta"},        {"dt_bias", "delta"},      {"b_weight", "b_projection"},
      {"c_weight", "c_projection"},  {"gamma_weight", "gamma"}, {"gamma_bias", "gamma"},
      {"norm_gain", "io"},           {"in_weight", "io"},       {"in_bias", "io"},
      {"out_weight", "io"},          {"out_bias", "io"}};
  return classes.at(name);
}

// Small enough that the h^4 truncation term stays below 1e-7 near the RMS norm's
// curvature, large enough that rounding stays under the instance-scaled floor.
constexpr double kStep = 2e-4;

const std::vector<std::string> kBlockClasses = {"a", "delta", "b_projection", "c_projection", "gamma", "io", "features"};

std::vector<Check> block(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "grad.block");
  std::map<std::string, double> worst;
  for (const auto& c : kBlockClasses) worst[c] = 0.0;
  std::size_t instances = 0;
  for (auto row : kAllRows) {
    for (bool pre_norm : {false, true}) {
      for (int rep = 0; rep < 2; ++rep, ++instances) {
        auto p = random_params(rng, 3, 2, layer::make_variant(row), pre_norm);
        auto seq = random_sequence(rng, 12, 3);
        // a second segment whose first coordinate steps backwards
        seq.t[7] = seq.t[6] - 1.0;
        seq.segment_starts = {7};
        const layer::Matrix w = random_matrix(rng, 12, 3);

        layer::MimoCache cache;
        layer::mimo_forward(p, seq, {ctx.pool}, &cache);
        auto grads = layer::StreamParams::zeros_like(p);
        const layer::Matrix dz = layer::mimo_backward(p, seq, cache, w, grads, {ctx.pool, 1 + rng.below(8)});

        auto loss = [&] { return layer::mimo_forward(p, seq).cwiseProduct(w).sum(); };
        std::vector<layer::ParamRef> params, grad_refs;
        p.for_each_param([&](const layer::ParamRef& r) { params.push_back(r); });
        grads.for_each_param([&](const layer::ParamRef& r) { grad_refs.push_back(r); });
        std::map<std::string, Pairs> by_class;
        for (std::size_t t = 0; t < params.size(); ++t) {
          auto& pairs = by_class[block_class(params[t].name)];
          for (std::size_t i = 0; i < params[t].size(); ++i) {
            pairs.add(grad_refs[t].data[i], five_point_difference(params[t].data[i], loss, kStep));
          }
        }
        auto& feats = by_class["features"];
        for (Eigen::Index i = 0; i < seq.features.size(); ++i) {
          feats.add(dz.data()[i], five_point_difference(seq.features.data()[i], loss, kStep));
        }
        double instance_scale = 0.0;
        for (const auto& [name, pairs] : by_class) instance_scale = std::max(instance_scale, pairs.scale());
        for (const auto& [name, pairs] : by_class) worst[name] = std::max(worst[name], pairs.error(instance_scale));
      }
    }
  }
  std::vector<Check> out;
  const std::string note = std::to_string(instances) + " instances over all variants";
  for (const auto& c : kBlockClasses) out.push_back(at_most("grad.block_" + c, worst[c], 1e-5, note));
  return out;
}

std::vector<Check> stack(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "grad.stack");
  double worst = 0.0;
  for (const auto& [row, final_norm] : {std::pair{layer::AblationRow::mamba, true},
                                        std::pair{layer::AblationRow::stream_dg, true},
                                        std::pair{layer::AblationRow::stream_0g, true},
                                        std::pair{layer::AblationRow::stream_dg, false}}) {
    layer::ModelConfig config;
    config.final_norm = final_norm;
    config.n = 6;
    config.m = 3;
    config.layers = 2;
    config.subsample_schedule = {{1, 2, 2}};
    config.variant = row;
    config.classes = 3;
    auto model = layer::StackModel::init(config, rng);
    perturb(model, rng);
    auto seq = random_sequence(rng, 20, 6, 1.0, 0.1);
    layer::Vector w(3);
    for (Eigen::Index i = 0; i < 3; ++i) w[i] = rng.uniform(-1.0, 1.0);

    layer::StackCache cache;
    layer::stack_forward(model, seq, {ctx.pool}, &cache);
    auto grads = layer::StackModel::zeros_like(model);
    const layer::Matrix dz = layer::stack_backward(model, cache, w, grads, {ctx.pool});

    auto loss = [&] { return layer::stack_forward(model, seq).dot(w); };
    std::vector<layer::ParamRef> params, grad_refs;
    model.for_each_param([&](const layer::ParamRef& r) { params.push_back(r); });
    grads.for_each_param([&](const layer::ParamRef& r) { grad_refs.push_back(r); });
    Pairs all;
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t].size(); ++i) {
        all.add(grad_refs[t].data[i], five_point_difference(params[t].data[i], loss, kStep));
      }
    }
    for (Eigen::Index i = 0; i < seq.features.size(); ++i) {
      all.add(dz.data()[i], five_point_difference(seq.features.data()[i], loss, kStep));
    }
    worst = std::max(worst, all.error());
  }
  return {at_most("grad.stack_end_to_end", worst, 1e-4, "2-block stack, 3 variants, with and without the final norm")};
}

}  // namespace

void add_grad_probes(std::vector<Probe>& out) {
  out.push_back({"grad", "siso", {"grad.siso_a", "grad.siso_delta", "grad.siso_b", "grad.siso_c", "grad.siso_u"}, siso});
  std::vector<std::string> ids;
  for (const auto& c : kBlockClasses) ids.push_back("grad.block_" + c);
  out.push_back({"grad", "block", ids, block});
  out.push_back({"grad", "stack", {"grad.stack_end_to_end"}, stack});
}

}  // namespace stream::verify::detail
