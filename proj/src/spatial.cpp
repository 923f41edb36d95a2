#include "pesinlab/spatial.hpp"

#include <stdexcept>

namespace pesinlab {

SpatialHash::SpatialHash(const MapSystem& system, double radius) : system_(&system) {
  if (!(radius > 0.0)) throw std::invalid_argument("SpatialHash: radius must be > 0");
  if (system.domain() == Domain::torus) {
    per_axis_ = std::max(1L, static_cast<long>(std::floor(1.0 / radius)));
    per_axis_ = std::min(per_axis_, 1L << 24);
    cell_ = 1.0 / static_cast<double>(per_axis_);
    if (per_axis_ < 3) per_axis_ = 1;  // neighbour scan would visit a cell twice
  } else {
    cell_ = radius;
  }
}

std::pair<long, long> SpatialHash::cell_of(const Point& p) const {
  const Point q = system_->wrap(p);
  return {static_cast<long>(std::floor(q(0) / cell_)), static_cast<long>(std::floor(q(1) / cell_))};
}

std::int64_t SpatialHash::key(long cx, long cy) const {
  if (per_axis_ > 0) {
    cx = ((cx % per_axis_) + per_axis_) % per_axis_;
    cy = ((cy % per_axis_) + per_axis_) % per_axis_;
    if (per_axis_ == 1) cx = cy = 0;
  }
  return (static_cast<std::int64_t>(cx) << 32) ^ static_cast<std::int64_t>(static_cast<std::uint32_t>(cy));
}

void SpatialHash::insert(int id, const Point& p) {
  if (id != static_cast<int>(points_.size())) throw std::invalid_argument("SpatialHash: ids must be sequential");
  points_.push_back(system_->wrap(p));
  const auto [cx, cy] = cell_of(p);
  cells_[key(cx, cy)].push_back(id);
}

int SpatialHash::nearest(const Point& p, double radius) const {
  int best = -1;
  double best_d = radius;
  for_each_near(p, radius, [&](int id) {
    const double d = system_->distance(points_[static_cast<std::size_t>(id)], p);
    if (d < best_d || (d == best_d && id < best)) {
      best_d = d;
      best = id;
    }
  });
  return best;
}

}  // namespace pesinlab
