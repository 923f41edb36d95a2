#pragma once

// Built-in planar diffeomorphisms: the test beds every other module runs on.

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pesinlab/kernels.hpp"

namespace pesinlab {

using Point = Eigen::Vector2d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class Domain { torus, plane };
enum class Direction { forward, inverse };
enum class SystemKind { cat, perturbed_cat, henon, standard };

struct Parameter {
  std::string name;
  double value;
};

/// An explicit diffeomorphism of T^2 (unit square, coordinates mod 1) or R^2.
///
/// Values are immutable after construction. Torus points are kept in
/// [0,1)^2; every operation wraps its inputs and outputs, callers never need
/// to. A system can be reversed with `inverted()`, which swaps the roles of
/// the forward and inverse maps (and of stable and unstable objects).
class MapSystem {
 public:
  /// Arnold cat map, A = [[2,1],[1,1]].
  static MapSystem cat();
  /// A x + eps (sin 2 pi x2, sin 2 pi x1) mod 1. Rejects |eps| >= (sqrt 2 - 1)/(2 pi),
  /// beyond which det Df can vanish.
  static MapSystem perturbed_cat(double epsilon = 0.05);
  /// (x, y) -> (1 + y - a x^2, b x) on the plane; b = 0 is rejected.
  static MapSystem henon(double a = 1.4, double b = 0.3);
  /// Chirikov standard map in unit-torus coordinates:
  /// x' = x + p + (K / 2 pi) sin 2 pi x,  p' = p + (K / 2 pi) sin 2 pi x.
  static MapSystem standard(double kick = 0.0);

  /// Builds a system from its identifier and a parameter map; unknown
  /// identifiers or parameters raise InvalidSystem.
  static MapSystem from_name(std::string_view name, const std::map<std::string, double>& params = {});
  static std::vector<std::string> builtin_names();

  const std::string& name() const { return name_; }
  SystemKind kind() const { return kind_; }
  int dimension() const { return 2; }
  Domain domain() const { return domain_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  /// C_f >= 1, bounding log|Df| and log|Df^-1| over the sampling grid.
  double derivative_bound() const { return derivative_bound_; }
  /// dim E^s; 1 for every built-in.
  int stable_index() const { return 1; }
  bool reversed() const { return reversed_; }

  MapSystem inverted() const;

  Point apply(const Point& x, Direction dir = Direction::forward) const;
  Point forward(const Point& x) const { return apply(x, Direction::forward); }
  Point inverse(const Point& x) const { return apply(x, Direction::inverse); }

  /// Df(x) of this system's forward map.
  Mat2 jacobian(const Point& x) const;
  /// D(f^-1)(y) = Df(f^-1 y)^-1.
  Mat2 inverse_jacobian(const Point& y) const;

  /// f(base + d) - f(base) (or the inverse map's), evaluated without the
  /// cancellation that subtracting two images would cause for tiny d.
  Vec2 displacement_image(const Point& base, const Vec2& d, Direction dir = Direction::forward) const;

  double distance(const Point& x, const Point& y) const;
  /// x - y; on the torus the representative of smallest norm.
  Vec2 difference(const Point& x, const Point& y) const;
  Point wrap(const Point& x) const;
  /// Plane systems only: the iterate has left the ball of radius 10.
  bool escaped(const Point& x) const;

  /// Box used for grid sweeps: the unit square on the torus, a box around the
  /// attractor for Henon.
  std::array<Point, 2> sampling_box() const;
  /// A point used when a caller does not supply one.
  Point default_point() const;
  /// Exact Lyapunov exponents when known in closed form (cat map).
  std::optional<std::array<double, 2>> analytic_exponents() const;

  double parameter(std::string_view name) const;

 private:
  MapSystem(std::string name, SystemKind kind, Domain domain, std::vector<Parameter> params);

  Point raw_apply(const Point& x, bool forward) const;
  Mat2 raw_jacobian(const Point& x) const;
  Vec2 raw_displacement(const Point& base, const Vec2& d, bool forward) const;
  Point perturbed_cat_preimage(const Point& y) const;

  std::string name_;
  SystemKind kind_;
  Domain domain_;
  std::vector<Parameter> params_;
  double p0_ = 0.0;
  double p1_ = 0.0;
  bool reversed_ = false;
  double derivative_bound_ = 1.0;
};

/// sup over an n x n grid of max(log|Df|, log|Df^-1|).
double derivative_log_sup(const MapSystem& system, int grid = 256, Execution exec = Execution::parallel);

/// A finite orbit piece {x, n}: iterate(j) = f^j(x).
class OrbitSegment {
 public:
  OrbitSegment(const MapSystem& system, const Point& base, int length);

  const Point& base() const { return points_.front(); }
  int length() const { return static_cast<int>(points_.size()) - 1; }
  const Point& iterate(int j) const { return points_.at(static_cast<std::size_t>(j)); }
  const std::vector<Point>& points() const { return points_; }

 private:
  std::vector<Point> points_;
};

/// Orbit points f^t(x) for t in [first, last], indexed by t.
struct OrbitWindow {
  int first = 0;
  std::vector<Point> points;

  int last() const { return first + static_cast<int>(points.size()) - 1; }
  const Point& at(int t) const { return points.at(static_cast<std::size_t>(t - first)); }
};

/// Computes f^t(x) for t in [-back, fwd]; backward points use the inverse map.
/// Raises OrbitEscape (index = t) for plane systems.
OrbitWindow orbit_window(const MapSystem& system, const Point& x, int back, int fwd);
/// Same window built only from forward iterates of `history`, placed at
/// index -back; avoids backward iteration on attractors.
OrbitWindow orbit_window_from_history(const MapSystem& system, const Point& history, int back, int fwd);

}  // namespace pesinlab
