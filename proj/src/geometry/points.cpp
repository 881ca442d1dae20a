#include "stream/geometry/points.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stream/common/errors.hpp"

namespace stream::geometry {
namespace {

void check_cloud(const PointCloud& points) {
  if (points.empty()) throw ContractError("empty point cloud");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw NumericError("non-finite point coordinate", i);
    }
  }
}

}  // namespace

AxisEmbedding AxisEmbedding::init(std::size_t width) {
  AxisEmbedding e;
  for (std::size_t s = 0; s < 3; ++s) {
    e.scale[s] = layer::Vector::Ones(static_cast<Eigen::Index>(width));
    e.shift[s] = layer::Vector::Constant(static_cast<Eigen::Index>(width), 0.5 * (static_cast<double>(s) - 1.0));
  }
  return e;
}

LinearPointEncoder LinearPointEncoder::init(std::size_t width, CounterRng& rng) {
  LinearPointEncoder enc;
  enc.weight.resize(static_cast<Eigen::Index>(width), 3);
  for (Eigen::Index i = 0; i < enc.weight.size(); ++i) enc.weight.data()[i] = rng.uniform(-1.0, 1.0);
  enc.bias = layer::Vector::Zero(static_cast<Eigen::Index>(width));
  return enc;
}

layer::Vector LinearPointEncoder::operator()(const Point3& p) const {
  return weight * Eigen::Vector3d(p.x, p.y, p.z) + bias;
}

std::vector<std::size_t> axis_order(const PointCloud& points, std::size_t axis) {
  if (axis > 2) throw ContractError("axis must be below 3");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const double a = points[i][axis], b = points[j][axis];
    if (a != b) return a < b;
    if (points[i] != points[j]) return points[i] < points[j];
    return i < j;
  });
  return order;
}

layer::TokenSequence serialize_points(const PointCloud& points, const PointEncoder& encoder,
                                      const AxisEmbedding& embedding) {
  check_cloud(points);
  const std::size_t n_pts = points.size();
  std::vector<layer::Vector> encoded;
  encoded.reserve(n_pts);
  for (const auto& p : points) encoded.push_back(encoder(p));
  const auto width = encoded.front().size();
  for (std::size_t s = 0; s < 3; ++s) {
    if (embedding.scale[s].size() != width || embedding.shift[s].size() != width) {
      throw ContractError("axis embedding width does not match the encoder");
    }
  }

  layer::TokenSequence seq;
  seq.t.reserve(3 * n_pts);
  seq.features.resize(static_cast<Eigen::Index>(3 * n_pts), width);
  for (std::size_t s = 0; s < 3; ++s) {
    if (s > 0) seq.segment_starts.push_back(s * n_pts);
    const auto order = axis_order(points, s);
    for (std::size_t i = 0; i < n_pts; ++i) {
      const std::size_t p = order[i];
      seq.t.push_back(points[p][s]);
      seq.features.row(static_cast<Eigen::Index>(s * n_pts + i)) =
          (embedding.scale[s].cwiseProduct(encoded[p]) + embedding.shift[s]).transpose();
    }
  }
  return seq;
}

std::size_t canonical_seed(const PointCloud& points) {
  check_cloud(points);
  return static_cast<std::size_t>(std::min_element(points.begin(), points.end()) - points.begin());
}

std::vector<std::size_t> fps(const PointCloud& points, std::size_t k, std::size_t seed_index) {
  check_cloud(points);
  if (k == 0 || k > points.size()) {
    throw ContractError("fps needs 1 <= k <= " + std::to_string(points.size()) + ", got " + std::to_string(k));
  }
  if (seed_index >= points.size()) throw ContractError("fps seed index out of range");
  std::vector<std::size_t> selected{seed_index};
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(points.size(), false);
  taken[seed_index] = true;
  while (selected.size() < k) {
    const Point3& last = points[selected.back()];
    std::size_t best = points.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], last));
      if (!taken[i] && nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    taken[best] = true;
    selected.push_back(best);
  }
  return selected;
}

std::vector<std::vector<std::size_t>> knn_group(const PointCloud& points,
                                                const std::vector<std::size_t>& centers,
                                                std::size_t k) {
  check_cloud(points);
  if (k == 0 || k > points.size()) {
    throw ContractError("knn needs 1 <= k <= " + std::to_string(points.size()) + ", got " + std::to_string(k));
  }
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(centers.size());
  std::vector<std::pair<double, std::size_t>> dist(points.size());
  for (std::size_t c : centers) {
    if (c >= points.size()) throw ContractError("knn center index out of range");
    for (std::size_t i = 0; i < points.size(); ++i) dist[i] = {squared_distance(points[c], points[i]), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> group(k);
    for (std::size_t i = 0; i < k; ++i) group[i] = dist[i].second;
    groups.push_back(std::move(group));
  }
  return groups;
}

}  // namespace stream::geometry
