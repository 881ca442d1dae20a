#include <numeric>
#include <set>

#include "probes.hpp"
#include "stream/geometry/events.hpp"
#include "stream/geometry/points.hpp"
#include "stream/verify/geometry_oracles.hpp"

namespace stream::verify::detail {
namespace {

using geometry::Point3;
using geometry::PointCloud;

PointCloud random_cloud(CounterRng& rng, std::size_t n) {
  PointCloud pts(n);
  for (auto& p : pts) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return pts;
}

// Coordinates on a coarse grid, so equal coordinates and equal distances are common.
PointCloud grid_cloud(CounterRng& rng, std::size_t n) {
  PointCloud pts(n);
  for (auto& p : pts) {
    p = {static_cast<double>(rng.below(4)), static_cast<double>(rng.below(4)), static_cast<double>(rng.below(4))};
  }
  return pts;
}

std::vector<std::size_t> random_permutation(CounterRng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

layer::Vector coordinate_encoder(const Point3& p) {
  layer::Vector v(4);
  v << p.x, p.y, p.z, p.x * p.y - p.z;
  return v;
}

std::vector<Check> serialization(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "geometry.serialization");
  const auto emb = geometry::AxisEmbedding::init(4);
  double perm_failures = 0.0, order_failures = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    const auto pts = trial % 2 ? random_cloud(rng, n) : grid_cloud(rng, n);
    const auto base = geometry::serialize_points(pts, coordinate_encoder, emb);
    PointCloud moved(n);
    const auto perm = random_permutation(rng, n);
    for (std::size_t i = 0; i < n; ++i) moved[i] = pts[perm[i]];
    const auto other = geometry::serialize_points(moved, coordinate_encoder, emb);
    perm_failures += base.t != other.t || base.features != other.features;

    bool ok = base.size() == 3 * n && base.segment_starts == std::vector<std::size_t>{n, 2 * n};
    for (std::size_t s = 0; s < 3 && ok; ++s) {
      for (std::size_t k = s * n + 1; k < (s + 1) * n; ++k) ok = ok && base.t[k] >= base.t[k - 1];
    }
    order_failures += !ok;
  }
  return {equal("geometry.serialize_permutation_invariant", perm_failures, 0.0, "100 random permutations"),
          equal("geometry.serialize_segments_sorted", order_failures, 0.0, "three segments of length N")};
}

std::vector<Check> fps_checks(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "geometry.fps");
  double oracle_failures = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(128);
    const auto cloud = trial % 2 ? random_cloud(rng, n) : grid_cloud(rng, n);
    const std::size_t k = 1 + rng.below(n);
    const std::size_t seed = rng.below(n);
    oracle_failures += geometry::fps(cloud, k, seed) != fps_reference(cloud, k, seed);
  }
  // distinct coordinates: with ties the index tie-break depends on the input order
  double perm_failures = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(127);
    const auto pts = random_cloud(rng, n);
    const auto perm = random_permutation(rng, n);
    PointCloud moved(n);
    for (std::size_t i = 0; i < n; ++i) moved[i] = pts[perm[i]];
    const std::size_t k = 1 + rng.below(n);
    std::set<Point3> a, b;
    for (auto i : geometry::fps(pts, k, geometry::canonical_seed(pts))) a.insert(pts[i]);
    for (auto i : geometry::fps(moved, k, geometry::canonical_seed(moved))) b.insert(moved[i]);
    perm_failures += a != b;
  }
  return {equal("geometry.fps_matches_oracle", oracle_failures, 0.0, "200 clouds, N<=128, half on a grid"),
          equal("geometry.fps_permutation_invariant", perm_failures, 0.0, "100 clouds, canonical seed")};
}

std::vector<Check> knn_checks(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "geometry.knn");
  double failures = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(128);
    const auto cloud = trial % 2 ? random_cloud(rng, n) : grid_cloud(rng, n);
    std::vector<std::size_t> centers;
    for (std::size_t i = 0, c = 1 + rng.below(8); i < c; ++i) centers.push_back(rng.below(n));
    const std::size_t k = 1 + rng.below(n);
    failures += geometry::knn_group(cloud, centers, k) != knn_reference(cloud, centers, k);
  }
  return {equal("geometry.knn_matches_oracle", failures, 0.0, "200 clouds, N<=128, half on a grid")};
}

std::vector<Check> tokens(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "geometry.tokens");
  double collisions = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = static_cast<std::uint32_t>(1 + rng.below(64));
    const auto h = static_cast<std::uint32_t>(1 + rng.below(64));
    std::set<std::uint32_t> seen;
    for (std::uint32_t p = 0; p < 2; ++p) {
      for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
          const geometry::EventRecord e{0, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                        static_cast<std::uint8_t>(p)};
          const auto id = geometry::token_id(e, w, h);
          collisions += !seen.insert(id).second || id >= 2 * w * h;
        }
      }
    }
  }
  return {equal("geometry.tokenize_injective", collisions, 0.0, "every (x, y, polarity) on 20 sensors")};
}

geometry::EventStream random_events(CounterRng& rng, std::size_t n, std::uint8_t polarity) {
  geometry::EventStream s{8, 8, {}};
  std::uint64_t t = rng.below(1000);
  for (std::size_t k = 0; k < n; ++k) {
    t += rng.bernoulli(0.2) ? 0 : rng.below(50);
    s.events.push_back({t, static_cast<std::uint16_t>(rng.below(8)), static_cast<std::uint16_t>(rng.below(8)), polarity});
  }
  return s;
}

std::vector<Check> cutmix(const SuiteContext& ctx) {
  CounterRng rng = probe_rng(ctx, "geometry.cutmix");
  double worst = 0.0;
  double outside = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    // polarity marks the origin: a carries 0, b carries 1
    const auto a = random_events(rng, 1 + rng.below(60), 0);
    const auto b = random_events(rng, 1 + rng.below(60), 1);
    const auto mixed = geometry::event_cutmix(a, b, rng);
    std::size_t from_b = 0;
    for (const auto& e : mixed.stream.events) from_b += e.polarity == 1;
    const double frac = mixed.stream.events.empty() ? 0.0
                        : static_cast<double>(from_b) / static_cast<double>(mixed.stream.size());
    worst = std::max(worst, std::abs(mixed.lambda - frac));
    outside += mixed.lambda < 0.0 || mixed.lambda > 1.0;
  }
  return {equal("geometry.cutmix_lambda_is_b_fraction", worst, 0.0, "200 random mixes"),
          equal("geometry.cutmix_lambda_in_unit_interval", outside, 0.0)};
}

}  // namespace

void add_geometry_probes(std::vector<Probe>& out) {
  out.push_back({"geometry", "serialization",
                 {"geometry.serialize_permutation_invariant", "geometry.serialize_segments_sorted"}, serialization});
  out.push_back({"geometry", "fps", {"geometry.fps_matches_oracle", "geometry.fps_permutation_invariant"}, fps_checks});
  out.push_back({"geometry", "knn", {"geometry.knn_matches_oracle"}, knn_checks});
  out.push_back({"geometry", "tokens", {"geometry.tokenize_injective"}, tokens});
  out.push_back({"geometry", "cutmix", {"geometry.cutmix_lambda_is_b_fraction", "geometry.cutmix_lambda_in_unit_interval"},
                 cutmix});
}

}  // namespace stream::verify::detail
