#pragma once

// Uniform-grid point index for fixed-radius neighbour queries, aware of the
// torus identification.

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pesinlab/dynsys.hpp"

namespace pesinlab {

class SpatialHash {
 public:
  /// `radius` is the largest query radius; cells are at least that wide.
  SpatialHash(const MapSystem& system, double radius);

  void insert(int id, const Point& p);
  /// Calls fn(id) for every stored point within `radius` of p (distance in
  /// the system's metric).
  template <class Fn>
  void for_each_near(const Point& p, double radius, Fn&& fn) const {
    const auto [cx, cy] = cell_of(p);
    const long reach = per_axis_ == 1 ? 0 : 1;
    for (long dx = -reach; dx <= reach; ++dx) {
      for (long dy = -reach; dy <= reach; ++dy) {
        const auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (int id : it->second) {
          if (system_->distance(points_[static_cast<std::size_t>(id)], p) < radius) fn(id);
        }
      }
    }
  }
  /// Nearest stored point within `radius`, or -1.
  int nearest(const Point& p, double radius) const;
  const Point& point(int id) const { return points_.at(static_cast<std::size_t>(id)); }

 private:
  std::pair<long, long> cell_of(const Point& p) const;
  std::int64_t key(long cx, long cy) const;

  const MapSystem* system_;
  double cell_;
  long per_axis_ = 0;  // torus only
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
  std::vector<Point> points_;
};

}  // namespace pesinlab
