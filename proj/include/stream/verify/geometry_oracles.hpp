#pragma once

// Quadratic reference implementations used to check fps and knn_group.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "stream/geometry/points.hpp"

namespace stream::verify {

/// Greedy max-min selection that recomputes every distance to the selected set.
inline std::vector<std::size_t> fps_reference(const geometry::PointCloud& points, std::size_t k,
                                              std::size_t seed) {
  std::vector<std::size_t> selected{seed};
  while (selected.size() < k) {
    std::size_t best = points.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (std::find(selected.begin(), selected.end(), i) != selected.end()) continue;
      double d = geometry::squared_distance(points[i], points[selected[0]]);
      for (std::size_t s : selected) d = std::min(d, geometry::squared_distance(points[i], points[s]));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    selected.push_back(best);
  }
  return selected;
}

/// Full sort of all indices by (distance, index) per center.
inline std::vector<std::vector<std::size_t>> knn_reference(const geometry::PointCloud& points,
                                                           const std::vector<std::size_t>& centers,
                                                           std::size_t k) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t c : centers) {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double da = geometry::squared_distance(points[c], points[a]);
      const double db = geometry::squared_distance(points[c], points[b]);
      return da != db ? da < db : a < b;
    });
    idx.resize(k);
    groups.push_back(std::move(idx));
  }
  return groups;
}

}  // namespace stream::verify
