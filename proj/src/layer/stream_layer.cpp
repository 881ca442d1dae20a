#include "stream/layer/stream_layer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stream/common/errors.hpp"
#include "stream/common/math.hpp"
#include "stream/scan/adjoint.hpp"
#include "stream/scan/scan.hpp"

namespace stream::layer {
namespace {

using ssm::Complex;

void fill_uniform(Matrix& m, CounterRng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

// Log-spaced value c of n in [lo, hi].
double log_spaced(std::size_t c, std::size_t n, double lo, double hi) {
  if (n <= 1) return std::sqrt(lo * hi);
  return lo * std::pow(hi / lo, static_cast<double>(c) / static_cast<double>(n - 1));
}

bool gamma_tied(const VariantFlags& v) { return v.gamma_softplus_linear && !v.use_timestamps; }
bool gamma_linear(const VariantFlags& v) { return v.gamma_softplus_linear && v.use_timestamps; }

double delta_at(const StreamParams& p, std::size_t c, double gap, double dt_pre) {
  const double scale = p.variant.delta_softplus_linear ? softplus(dt_pre) : softplus(p.delta_raw[c]);
  return p.variant.use_timestamps ? gap * scale : scale;
}

double gamma_at(const StreamParams& p, double delta, double gamma_pre) {
  if (gamma_tied(p.variant)) return delta;
  if (gamma_linear(p.variant)) return softplus(gamma_pre);
  return 1.0;
}

std::vector<Complex> a_entries(const StreamParams& p) {
  std::vector<Complex> a(p.width * p.state);
  for (std::size_t c = 0; c < p.width; ++c) {
    for (std::size_t j = 0; j < p.state; ++j) {
      a[c * p.state + j] = Complex(-softplus(p.a_decay_raw(c, j)), p.a_imag(c, j));
    }
  }
  return a;
}

Discretization discretize(const StreamParams& p, std::vector<double> gaps, const Matrix& u) {
  const auto n_tok = u.rows();
  const auto n = static_cast<Eigen::Index>(p.width);
  Discretization d;
  d.gaps = std::move(gaps);
  d.b = u * p.b_weight.transpose();
  d.c = u * p.c_weight.transpose();
  if (p.variant.delta_softplus_linear) {
    d.dt_pre = u * p.dt_weight.transpose();
    d.dt_pre.rowwise() += p.dt_bias.transpose();
  }
  if (gamma_linear(p.variant)) {
    d.gamma_pre = u * p.gamma_weight.transpose();
    d.gamma_pre.rowwise() += p.gamma_bias.transpose();
  }
  d.delta.resize(n_tok, n);
  d.gamma.resize(n_tok, n);
  for (Eigen::Index k = 0; k < n_tok; ++k) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const double pre = d.dt_pre.size() ? d.dt_pre(k, c) : 0.0;
      d.delta(k, c) = delta_at(p, static_cast<std::size_t>(c), d.gaps[k], pre);
      d.gamma(k, c) = gamma_at(p, d.delta(k, c), d.gamma_pre.size() ? d.gamma_pre(k, c) : 0.0);
    }
  }
  return d;
}

void check_width(const StreamParams& p, const TokenSequence& seq) {
  seq.validate();
  if (seq.size() == 0) throw ContractError("empty token sequence");
  if (static_cast<std::size_t>(seq.features.cols()) != p.width) {
    throw ContractError("token features have width " + std::to_string(seq.features.cols()) +
                        ", block width is " + std::to_string(p.width));
  }
}

// Leaves [exp(A_c Delta_kc), Gamma_kc x_kc b_k] of channel c.
scan::PairSequence channel_leaves(const StreamParams& p, const std::vector<Complex>& a,
                                  const Matrix& x, const Discretization& d, std::size_t c) {
  const std::size_t n_tok = static_cast<std::size_t>(x.rows());
  const std::size_t m = p.state;
  scan::PairSequence leaves(n_tok, m);
  for (std::size_t k = 0; k < n_tok; ++k) {
    const double delta = d.delta(k, c);
    const double drive = d.gamma(k, c) * x(k, c);
    auto la = leaves.a.row(k);
    auto lb = leaves.b.row(k);
    for (std::size_t j = 0; j < m; ++j) {
      la[j] = delta == 0.0 ? Complex(1.0) : std::exp(a[c * m + j] * delta);
      lb[j] = Complex(drive * d.b(k, j), 0.0);
    }
  }
  return leaves;
}

template <class Fn>
void for_channels(const MimoOptions& options, std::size_t n, Fn&& fn) {
  if (options.pool) {
    options.pool->parallel_for(n, fn);
  } else {
    for (std::size_t c = 0; c < n; ++c) fn(c);
  }
}

}  // namespace

VariantFlags make_variant(AblationRow row) {
  switch (row) {
    case AblationRow::mamba: return {false, true, true};
    case AblationRow::stream_00: return {true, false, false};
    case AblationRow::stream_0g: return {true, false, true};
    case AblationRow::stream_d0: return {true, true, false};
    case AblationRow::stream_dg: return {true, true, true};
  }
  throw ConfigError("unknown ablation row");
}

AblationRow parse_ablation_row(std::string_view name) {
  if (name == "mamba") return AblationRow::mamba;
  if (name == "stream-00") return AblationRow::stream_00;
  if (name == "stream-0g" || name == "stream-0Γ") return AblationRow::stream_0g;
  if (name == "stream-d0" || name == "stream-Δ0") return AblationRow::stream_d0;
  if (name == "stream-dg" || name == "stream-ΔΓ") return AblationRow::stream_dg;
  throw ConfigError("unknown ablation row '" + std::string(name) +
                    "' (expected mamba, stream-00, stream-0g, stream-d0, stream-dg)");
}

std::string_view to_string(AblationRow row) {
  switch (row) {
    case AblationRow::mamba: return "mamba";
    case AblationRow::stream_00: return "stream-00";
    case AblationRow::stream_0g: return "stream-0g";
    case AblationRow::stream_d0: return "stream-d0";
    case AblationRow::stream_dg: return "stream-dg";
  }
  return "?";
}

bool TokenSequence::starts_segment(std::size_t k) const {
  return k == 0 || std::binary_search(segment_starts.begin(), segment_starts.end(), k);
}

std::vector<double> TokenSequence::gaps() const {
  std::vector<double> g(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!starts_segment(k)) g[k] = t[k] - t[k - 1];
  }
  return g;
}

void TokenSequence::validate() const {
  if (static_cast<std::size_t>(features.rows()) != t.size()) {
    throw ContractError("token sequence has " + std::to_string(t.size()) + " coordinates but " +
                        std::to_string(features.rows()) + " feature rows");
  }
  for (std::size_t i = 0; i < segment_starts.size(); ++i) {
    if (segment_starts[i] >= t.size() || (i > 0 && segment_starts[i] <= segment_starts[i - 1])) {
      throw ContractError("segment starts must be increasing indices into the sequence");
    }
  }
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!std::isfinite(t[k])) throw NumericError("non-finite coordinate", k);
    if (k > 0 && !starts_segment(k) && t[k] < t[k - 1]) {
      throw OrderError("coordinates decrease at token " + std::to_string(k) + " (" +
                       std::to_string(t[k - 1]) + " -> " + std::to_string(t[k]) + ")");
    }
  }
}

TokenSequence subsample(const TokenSequence& seq, std::size_t factor) {
  if (factor == 0) throw ContractError("subsample factor must be at least 1");
  if (factor == 1) return seq;
  const std::size_t kept = seq.size() / factor;
  TokenSequence out;
  out.t.resize(kept);
  out.features.resize(static_cast<Eigen::Index>(kept), seq.features.cols());
  bool pending_start = false;
  for (std::size_t k = 0, i = 0; k < seq.size() && i < kept; ++k) {
    if (k > 0 && seq.starts_segment(k)) pending_start = true;
    if ((k + 1) % factor != 0) continue;
    out.t[i] = seq.t[k];
    out.features.row(static_cast<Eigen::Index>(i)) = seq.features.row(static_cast<Eigen::Index>(k));
    if (i > 0 && pending_start) out.segment_starts.push_back(i);
    pending_start = false;
    ++i;
  }
  return out;
}

StreamParams StreamParams::init(std::size_t width, std::size_t state, VariantFlags variant,
                                bool pre_norm, CounterRng& rng, const InitOptions& options) {
  if (width == 0 || state == 0) throw ConfigError("block width and state must be positive");
  if (!(options.typical_gap > 0.0)) throw ConfigError("typical_gap must be positive");
  const auto n = static_cast<Eigen::Index>(width);
  const auto m = static_cast<Eigen::Index>(state);
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  StreamParams p;
  p.width = width;
  p.state = state;
  p.variant = variant;
  p.pre_norm = pre_norm;
  p.norm_gain = Vector::Ones(n);
  p.in_weight.resize(n, n);
  fill_uniform(p.in_weight, rng, bound);
  p.in_bias = Vector::Zero(n);
  p.a_decay_raw.resize(n, m);
  p.a_imag.resize(n, m);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index j = 0; j < m; ++j) {
      p.a_decay_raw(c, j) = softplus_inverse(0.5);
      p.a_imag(c, j) = std::numbers::pi * static_cast<double>(j);
    }
  }
  // time scales: softplus(delta) * typical_gap log-spaced over [0.01, 1]
  p.delta_raw.resize(n);
  p.dt_bias.resize(n);
  for (std::size_t c = 0; c < width; ++c) {
    const double coordinate_scale = log_spaced(c, width, 0.01, 1.0) / options.typical_gap;
    p.delta_raw[c] = softplus_inverse(coordinate_scale);
    p.dt_bias[c] = variant.use_timestamps ? softplus_inverse(coordinate_scale)
                                          : softplus_inverse(log_spaced(c, width, 0.001, 0.1));
  }
  p.b_weight.resize(m, n);
  p.c_weight.resize(m, n);
  fill_uniform(p.b_weight, rng, bound);
  fill_uniform(p.c_weight, rng, bound);
  p.gamma_weight.resize(n, n);
  fill_uniform(p.gamma_weight, rng, bound);
  p.gamma_bias = Vector::Zero(n);
  p.dt_weight.resize(n, n);
  fill_uniform(p.dt_weight, rng, bound);
  p.out_weight.resize(n, n);
  fill_uniform(p.out_weight, rng, bound);
  p.out_bias = Vector::Zero(n);
  return p;
}

StreamParams StreamParams::zeros_like(const StreamParams& other) {
  StreamParams p = other;
  p.for_each_param([](const ParamRef& r) { std::fill(r.data, r.data + r.size(), 0.0); });
  return p;
}

ssm::DiagonalMatrixA StreamParams::channel_a(std::size_t c) const {
  if (c >= width) throw ContractError("channel index out of range");
  ssm::ComplexVector e(state);
  for (std::size_t j = 0; j < state; ++j) e[j] = Complex(-softplus(a_decay_raw(c, j)), a_imag(c, j));
  return ssm::DiagonalMatrixA(std::move(e));
}

Discretization discretize_stream(const StreamParams& params, const TokenSequence& seq) {
  check_width(params, seq);
  return discretize(params, seq.gaps(), seq.features);
}

Matrix rms_norm(const Matrix& z, const Vector& gain, Vector* inv_rms) {
  const double n = static_cast<double>(z.cols());
  Vector inv(z.rows());
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    inv[k] = 1.0 / std::sqrt(z.row(k).squaredNorm() / n + kRmsEps);
    out.row(k) = (z.row(k) * inv[k]).cwiseProduct(gain.transpose());
  }
  if (inv_rms) *inv_rms = std::move(inv);
  return out;
}

Matrix rms_norm_backward(const Matrix& z, const Vector& gain, const Vector& inv_rms,
                         const Matrix& d_normed, Vector& d_gain) {
  const double n = static_cast<double>(z.cols());
  Matrix dz(z.rows(), z.cols());
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    const double inv = inv_rms[k];
    d_gain += (d_normed.row(k).cwiseProduct(z.row(k)) * inv).transpose();
    const auto gd = d_normed.row(k).cwiseProduct(gain.transpose());
    const double proj = gd.dot(z.row(k));
    dz.row(k) = gd * inv - z.row(k) * (proj * inv * inv * inv / n);
  }
  return dz;
}

Matrix mimo_forward(const StreamParams& params, const TokenSequence& seq,
                    const MimoOptions& options, MimoCache* cache) {
  check_width(params, seq);
  const std::size_t n = params.width;
  const std::size_t m = params.state;
  MimoCache local;
  MimoCache& cc = cache ? *cache : local;

  cc.normed = params.pre_norm ? rms_norm(seq.features, params.norm_gain, &cc.inv_rms) : seq.features;
  cc.x = cc.normed * params.in_weight.transpose();
  cc.x.rowwise() += params.in_bias.transpose();
  cc.disc = discretize(params, seq.gaps(), cc.x);
  cc.y = Matrix::Zero(cc.x.rows(), static_cast<Eigen::Index>(n));

  const auto a = a_entries(params);
  for_channels(options, n, [&](std::size_t c) {
    auto leaves = channel_leaves(params, a, cc.x, cc.disc, c);
    scan::scan_sequential_inplace(leaves);
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const auto h = leaves.b.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += cc.disc.c(k, j) * h[j].real();
      cc.y(k, c) = acc;
    }
  });

  Matrix out = cc.y * params.out_weight.transpose();
  out.rowwise() += params.out_bias.transpose();
  out += seq.features;
  return out;
}

Matrix mimo_backward(const StreamParams& params, const TokenSequence& seq, const MimoCache& cache,
                     const Matrix& d_out, StreamParams& grads, const MimoOptions& options) {
  const std::size_t n = params.width;
  const std::size_t m = params.state;
  const auto n_tok = static_cast<Eigen::Index>(seq.size());
  if (d_out.rows() != n_tok || d_out.cols() != static_cast<Eigen::Index>(n)) {
    throw ContractError("output gradient shape does not match the block output");
  }
  if (cache.x.rows() != n_tok) throw ContractError("missing forward cache for block backward");
  const Discretization& d = cache.disc;

  grads.out_weight += d_out.transpose() * cache.y;
  grads.out_bias += d_out.colwise().sum().transpose();
  const Matrix dy = d_out * params.out_weight;

  Matrix dx = Matrix::Zero(n_tok, static_cast<Eigen::Index>(n));
  Matrix d_delta = Matrix::Zero(n_tok, static_cast<Eigen::Index>(n));
  Matrix d_gamma = Matrix::Zero(n_tok, static_cast<Eigen::Index>(n));
  std::vector<Matrix> d_b_parts(n), d_c_parts(n);

  const auto a = a_entries(params);
  for_channels(options, n, [&](std::size_t c) {
    const auto leaves = channel_leaves(params, a, cache.x, d, c);
    scan::ComplexRows state_grads(static_cast<std::size_t>(n_tok), m);
    for (Eigen::Index k = 0; k < n_tok; ++k) {
      auto g = state_grads.row(static_cast<std::size_t>(k));
      for (std::size_t j = 0; j < m; ++j) g[j] = Complex(dy(k, c) * d.c(k, j), 0.0);
    }
    Matrix& dc = d_c_parts[c];
    dc.setZero(n_tok, static_cast<Eigen::Index>(m));
    const auto leaf_grads = scan::adjoint_scan(
        leaves, state_grads, {options.checkpoint_interval, {}},
        [&](std::size_t k, std::span<const Complex> h) {
          for (std::size_t j = 0; j < m; ++j) dc(k, j) = dy(k, c) * h[j].real();
        });

    Matrix& db = d_b_parts[c];
    db.setZero(n_tok, static_cast<Eigen::Index>(m));
    std::vector<Complex> d_a(m);
    for (Eigen::Index k = 0; k < n_tok; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const auto lam = leaf_grads.b.row(kk);
      const auto ga = leaf_grads.a.row(kk);
      const auto decay = leaves.a.row(kk);
      const double delta = d.delta(k, c);
      const double drive = d.gamma(k, c) * cache.x(k, c);
      double d_drive = 0.0;
      double dd = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        d_drive += lam[j].real() * d.b(k, j);
        db(k, j) = drive * lam[j].real();
        const Complex aj = a[c * m + j];
        dd += (std::conj(aj * decay[j]) * ga[j]).real();
        d_a[j] += std::conj(delta * decay[j]) * ga[j];
      }
      d_gamma(k, c) = cache.x(k, c) * d_drive;
      dx(k, c) += d.gamma(k, c) * d_drive;
      d_delta(k, c) = dd;
    }
    for (std::size_t j = 0; j < m; ++j) {
      grads.a_decay_raw(c, j) += d_a[j].real() * -sigmoid(params.a_decay_raw(c, j));
      grads.a_imag(c, j) += d_a[j].imag();
    }
  });

  Matrix d_bmat = Matrix::Zero(n_tok, static_cast<Eigen::Index>(m));
  Matrix d_cmat = Matrix::Zero(n_tok, static_cast<Eigen::Index>(m));
  for (std::size_t c = 0; c < n; ++c) {
    d_bmat += d_b_parts[c];
    d_cmat += d_c_parts[c];
  }

  const VariantFlags& v = params.variant;
  if (gamma_tied(v)) d_delta += d_gamma;
  if (v.delta_softplus_linear) {
    Matrix d_pre(n_tok, static_cast<Eigen::Index>(n));
    for (Eigen::Index k = 0; k < n_tok; ++k) {
      const double g = v.use_timestamps ? d.gaps[k] : 1.0;
      for (Eigen::Index c = 0; c < d_pre.cols(); ++c) {
        d_pre(k, c) = d_delta(k, c) * g * sigmoid(d.dt_pre(k, c));
      }
    }
    grads.dt_weight += d_pre.transpose() * cache.x;
    grads.dt_bias += d_pre.colwise().sum().transpose();
    dx += d_pre * params.dt_weight;
  } else {
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < n_tok; ++k) {
        acc += d_delta(k, c) * (v.use_timestamps ? d.gaps[k] : 1.0);
      }
      grads.delta_raw[c] += acc * sigmoid(params.delta_raw[c]);
    }
  }
  if (gamma_linear(v)) {
    Matrix d_pre = d_gamma;
    for (Eigen::Index i = 0; i < d_pre.size(); ++i) d_pre.data()[i] *= sigmoid(d.gamma_pre.data()[i]);
    grads.gamma_weight += d_pre.transpose() * cache.x;
    grads.gamma_bias += d_pre.colwise().sum().transpose();
    dx += d_pre * params.gamma_weight;
  }
  grads.b_weight += d_bmat.transpose() * cache.x;
  dx += d_bmat * params.b_weight;
  grads.c_weight += d_cmat.transpose() * cache.x;
  dx += d_cmat * params.c_weight;

  grads.in_weight += dx.transpose() * cache.normed;
  grads.in_bias += dx.colwise().sum().transpose();
  const Matrix d_normed = dx * params.in_weight;

  Matrix dz = params.pre_norm ? rms_norm_backward(seq.features, params.norm_gain, cache.inv_rms,
                                                  d_normed, grads.norm_gain)
                              : d_normed;
  dz += d_out;
  return dz;
}

BlockStepper::BlockStepper(const StreamParams& params)
    : params_(&params),
      h_(params.width * params.state),
      a_(a_entries(params)),
      normed_(params.width),
      x_(params.width),
      b_(params.state),
      c_(params.state),
      y_(params.width),
      out_(params.width) {}

void BlockStepper::reset() {
  std::fill(h_.begin(), h_.end(), Complex(0));
  started_ = false;
  last_t_ = 0.0;
}

const Vector& BlockStepper::step(double t, const Eigen::Ref<const Vector>& z, bool segment_start) {
  const StreamParams& p = *params_;
  if (static_cast<std::size_t>(z.size()) != p.width) throw ContractError("token width mismatch");
  if (!std::isfinite(t)) throw NumericError("non-finite coordinate", 0);
  double gap = 0.0;
  if (started_ && !segment_start) {
    gap = t - last_t_;
    if (gap < 0.0) throw OrderError("coordinate went backwards in stream");
  }
  started_ = true;
  last_t_ = t;

  if (p.pre_norm) {
    const double inv = 1.0 / std::sqrt(z.squaredNorm() / static_cast<double>(p.width) + kRmsEps);
    normed_ = (z * inv).cwiseProduct(p.norm_gain);
  } else {
    normed_ = z;
  }
  x_.noalias() = p.in_weight * normed_;
  x_ += p.in_bias;
  b_.noalias() = p.b_weight * x_;
  c_.noalias() = p.c_weight * x_;
  const std::size_t m = p.state;
  for (std::size_t c = 0; c < p.width; ++c) {
    const double pre = p.variant.delta_softplus_linear ? p.dt_weight.row(c).dot(x_) + p.dt_bias[c] : 0.0;
    const double delta = delta_at(p, c, gap, pre);
    const double gpre = gamma_linear(p.variant) ? p.gamma_weight.row(c).dot(x_) + p.gamma_bias[c] : 0.0;
    const double drive = gamma_at(p, delta, gpre) * x_[c];
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      Complex& h = h_[c * m + j];
      const Complex decay = delta == 0.0 ? Complex(1.0) : std::exp(a_[c * m + j] * delta);
      h = decay * h + Complex(drive * b_[j], 0.0);
      acc += c_[j] * h.real();
    }
    y_[c] = acc;
  }
  out_.noalias() = p.out_weight * y_;
  out_ += p.out_bias + z;
  return out_;
}

}  // namespace stream::layer
