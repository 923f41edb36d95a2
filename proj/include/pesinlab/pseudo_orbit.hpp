#pragma once

#include <optional>
#include <vector>

#include "pesinlab/dynsys.hpp"

namespace pesinlab {

/// One orbit piece {x_i, n_i}. `points`, when non-empty, holds f^j(x_i) for
/// j in [0, n_i] computed by the caller (e.g. in closed form) and replaces
/// iteration wherever the piece is needed.
struct Segment {
  Point base;
  int length = 1;
  std::vector<Point> points = {};

  /// f^j(x_i), j in [0, n_i].
  std::vector<Point> trajectory(const MapSystem& system) const;
};

/// Finite window of a delta-pseudo-orbit {x_i, n_i}, i in [first_index,
/// first_index + segments.size()). Offsets c_i place segment i on the time
/// axis of the shadowing orbit: c_0 = 0, c_i = n_0 + ... + n_{i-1} for i > 0,
/// c_i = -(n_i + ... + n_{-1}) for i < 0.
struct PseudoOrbit {
  int first_index = 0;
  std::vector<Segment> segments;
  /// distance(f^{n_i}(x_i), x_{i+1}); for a periodic window the last entry is
  /// the jump back onto segment 0.
  std::vector<double> jump_sizes;
  /// m when x_{i+m} = x_i; the window then holds exactly one period.
  std::optional<int> period;
  double delta = 0.0;

  int size() const { return static_cast<int>(segments.size()); }
  int last_index() const { return first_index + size() - 1; }
  const Segment& segment(int i) const { return segments.at(static_cast<std::size_t>(i - first_index)); }
  /// c_i per the convention above.
  long offset(int i) const;
  /// Sum of n_i over the window.
  long total_length() const;
  /// Offset of the first segment (<= 0).
  long start_time() const { return offset(first_index); }
  double max_jump() const;

  /// Fills jump_sizes from the segments.
  void measure_jumps(const MapSystem& system);
};

/// Cuts the exact orbit of x into `count` consecutive segments of length n,
/// starting at index first_index (segment first_index starts at x).
PseudoOrbit exact_pseudo_orbit(const MapSystem& system, const Point& x, int n, int count, int first_index = 0);

}  // namespace pesinlab
