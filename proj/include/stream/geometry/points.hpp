#pragma once

// Point clouds as token sequences: three axis-sorted copies of the cloud, plus
// farthest point sampling and k-nearest-neighbor grouping.

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <vector>

#include "stream/common/rng.hpp"
#include "stream/layer/stream_layer.hpp"

namespace stream::geometry {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](std::size_t axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  auto operator<=>(const Point3&) const = default;  // lexicographic (x, y, z)
};

using PointCloud = std::vector<Point3>;

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

/// Per-axis affine map applied to encoded point features.
struct AxisEmbedding {
  std::array<layer::Vector, 3> scale;
  std::array<layer::Vector, 3> shift;

  /// Unit scales; shifts of -0.5, 0, 0.5 mark the three segments.
  static AxisEmbedding init(std::size_t width);
};

using PointEncoder = std::function<layer::Vector(const Point3&)>;

/// Affine point encoder u = W (x, y, z) + b.
struct LinearPointEncoder {
  layer::Matrix weight;  // n x 3
  layer::Vector bias;    // n

  static LinearPointEncoder init(std::size_t width, CounterRng& rng);
  layer::Vector operator()(const Point3& p) const;
};

/// Indices sorted by coordinate `axis`, ties broken by the whole point
/// lexicographically, then by index.
std::vector<std::size_t> axis_order(const PointCloud& points, std::size_t axis);

/// 3N tokens: the X-sorted, Y-sorted and Z-sorted copies of the cloud. Segment s
/// uses coordinate s as its ordering coordinate and features
/// scale_s * encoder(p) + shift_s. Segment s starts at s * N.
layer::TokenSequence serialize_points(const PointCloud& points, const PointEncoder& encoder,
                                      const AxisEmbedding& embedding);

/// Index of the lexicographically smallest point (smallest index among equals).
std::size_t canonical_seed(const PointCloud& points);

/// Greedy max-min selection of k indices starting at `seed_index`. Ties go to the
/// smaller index.
std::vector<std::size_t> fps(const PointCloud& points, std::size_t k, std::size_t seed_index);

/// The k nearest points of every center, nearest first, ties to the smaller index.
std::vector<std::vector<std::size_t>> knn_group(const PointCloud& points,
                                                const std::vector<std::size_t>& centers,
                                                std::size_t k);

}  // namespace stream::geometry
