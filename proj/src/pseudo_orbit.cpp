#include "pesinlab/pseudo_orbit.hpp"

#include <algorithm>
#include <stdexcept>

namespace pesinlab {

std::vector<Point> Segment::trajectory(const MapSystem& system) const {
  if (!points.empty()) {
    if (static_cast<int>(points.size()) != length + 1)
      throw std::invalid_argument("Segment: explicit points must number n_i + 1");
    return points;
  }
  std::vector<Point> out{system.wrap(base)};
  for (int j = 0; j < length; ++j) out.push_back(system.forward(out.back()));
  return out;
}

long PseudoOrbit::offset(int i) const {
  long c = 0;
  if (i >= 0) {
    for (int j = 0; j < i; ++j) c += segment(j).length;
  } else {
    for (int j = i; j < 0; ++j) c -= segment(j).length;
  }
  return c;
}

long PseudoOrbit::total_length() const {
  long n = 0;
  for (const auto& s : segments) n += s.length;
  return n;
}

double PseudoOrbit::max_jump() const {
  return jump_sizes.empty() ? 0.0 : *std::max_element(jump_sizes.begin(), jump_sizes.end());
}

void PseudoOrbit::measure_jumps(const MapSystem& system) {
  jump_sizes.clear();
  const int links = period ? size() : size() - 1;
  for (int k = 0; k < links; ++k) {
    const Point p = segments[static_cast<std::size_t>(k)].trajectory(system).back();
    const auto next = static_cast<std::size_t>((k + 1) % size());
    jump_sizes.push_back(system.distance(p, segments[next].base));
  }
}

PseudoOrbit exact_pseudo_orbit(const MapSystem& system, const Point& x, int n, int count, int first_index) {
  if (n < 1 || count < 1) throw std::invalid_argument("exact_pseudo_orbit: n, count must be >= 1");
  PseudoOrbit po;
  po.first_index = first_index;
  Point p = system.wrap(x);
  for (int i = 0; i < count; ++i) {
    po.segments.push_back({p, n});
    for (int j = 0; j < n; ++j) p = system.forward(p);
  }
  po.measure_jumps(system);
  return po;
}

}  // namespace pesinlab
