#include "pesinlab/dynsys.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pesinlab/error.hpp"

namespace pesinlab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr double escape_radius = 10.0;

// sin(a + h) - sin(a), exact for small h.
double sin_increment(double a, double h) { return 2.0 * std::cos(a + 0.5 * h) * std::sin(0.5 * h); }

const Mat2& cat_matrix() {
  static const Mat2 a = (Mat2() << 2.0, 1.0, 1.0, 1.0).finished();
  return a;
}

const Mat2& cat_inverse() {
  static const Mat2 a = (Mat2() << 1.0, -1.0, -1.0, 2.0).finished();
  return a;
}

double wrap_unit(double v) {
  double w = v - std::floor(v);
  return w >= 1.0 ? 0.0 : w;
}

}  // namespace

MapSystem::MapSystem(std::string name, SystemKind kind, Domain domain, std::vector<Parameter> params)
    : name_(std::move(name)), kind_(kind), domain_(domain), params_(std::move(params)) {
  if (!params_.empty()) p0_ = params_[0].value;
  if (params_.size() > 1) p1_ = params_[1].value;
  for (const auto& p : params_)
    if (!std::isfinite(p.value)) throw Error(ErrorCode::invalid_system, name_ + ": non-finite parameter " + p.name);
  derivative_bound_ = std::max(1.0, derivative_log_sup(*this));
}

MapSystem MapSystem::cat() { return MapSystem("cat", SystemKind::cat, Domain::torus, {}); }

MapSystem MapSystem::perturbed_cat(double epsilon) {
  const double limit = (std::numbers::sqrt2 - 1.0) / two_pi;
  if (!(std::abs(epsilon) < limit))
    throw Error(ErrorCode::invalid_system, "perturbed_cat: |epsilon| must be below " + std::to_string(limit));
  return MapSystem("perturbed_cat", SystemKind::perturbed_cat, Domain::torus, {{"epsilon", epsilon}});
}

MapSystem MapSystem::henon(double a, double b) {
  if (!(std::abs(b) > 0.0)) throw Error(ErrorCode::invalid_system, "henon: b = 0 is not invertible");
  return MapSystem("henon", SystemKind::henon, Domain::plane, {{"a", a}, {"b", b}});
}

MapSystem MapSystem::standard(double kick) {
  return MapSystem("standard", SystemKind::standard, Domain::torus, {{"kick", kick}});
}

std::vector<std::string> MapSystem::builtin_names() { return {"cat", "perturbed_cat", "henon", "standard"}; }

MapSystem MapSystem::from_name(std::string_view name, const std::map<std::string, double>& params) {
  auto take = [&](std::vector<std::string> allowed) {
    for (const auto& [key, value] : params) {
      (void)value;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw Error(ErrorCode::invalid_system, std::string(name) + ": unknown parameter '" + key + "'");
    }
  };
  auto get = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (name == "cat") {
    take({});
    return cat();
  }
  if (name == "perturbed_cat") {
    take({"epsilon"});
    return perturbed_cat(get("epsilon", 0.05));
  }
  if (name == "henon") {
    take({"a", "b"});
    return henon(get("a", 1.4), get("b", 0.3));
  }
  if (name == "standard") {
    take({"kick"});
    return standard(get("kick", 0.0));
  }
  throw Error(ErrorCode::invalid_system, "unknown system '" + std::string(name) + "'");
}

MapSystem MapSystem::inverted() const {
  MapSystem copy = *this;
  copy.reversed_ = !reversed_;
  copy.name_ = reversed_ ? name_.substr(0, name_.size() - 3) : name_ + "^-1";
  return copy;
}

double MapSystem::parameter(std::string_view key) const {
  for (const auto& p : params_)
    if (p.name == key) return p.value;
  throw Error(ErrorCode::invalid_system, name_ + ": no parameter '" + std::string(key) + "'");
}

Point MapSystem::wrap(const Point& x) const {
  if (domain_ == Domain::plane) return x;
  return Point(wrap_unit(x(0)), wrap_unit(x(1)));
}

Vec2 MapSystem::difference(const Point& x, const Point& y) const {
  Vec2 d = x - y;
  if (domain_ == Domain::torus) {
    d(0) -= std::nearbyint(d(0));
    d(1) -= std::nearbyint(d(1));
  }
  return d;
}

double MapSystem::distance(const Point& x, const Point& y) const { return difference(x, y).norm(); }

bool MapSystem::escaped(const Point& x) const {
  return domain_ == Domain::plane && !(x.norm() <= escape_radius);
}

Point MapSystem::raw_apply(const Point& x, bool fwd) const {
  switch (kind_) {
    case SystemKind::cat:
      return wrap(fwd ? Point(cat_matrix() * x) : Point(cat_inverse() * x));
    case SystemKind::perturbed_cat: {
      if (!fwd) return perturbed_cat_preimage(x);
      const Point lin = cat_matrix() * x;
      return wrap(Point(lin(0) + p0_ * std::sin(two_pi * x(1)), lin(1) + p0_ * std::sin(two_pi * x(0))));
    }
    case SystemKind::henon:
      if (fwd) return Point(1.0 + x(1) - p0_ * x(0) * x(0), p1_ * x(0));
      else {
        const double u = x(1) / p1_;
        return Point(u, x(0) - 1.0 + p0_ * u * u);
      }
    case SystemKind::standard: {
      const double kick = p0_ / two_pi;
      if (fwd) {
        const double p = x(1) + kick * std::sin(two_pi * x(0));
        return wrap(Point(x(0) + p, p));
      }
      const double u = x(0) - x(1);
      return wrap(Point(u, x(1) - kick * std::sin(two_pi * u)));
    }
  }
  return x;
}

Point MapSystem::perturbed_cat_preimage(const Point& y) const {
  Point x = wrap(Point(cat_inverse() * y));
  Vec2 r = difference(raw_apply(x, true), y);
  for (int iter = 0; iter < 60 && r.norm() > 0.0; ++iter) {
    const Vec2 step = raw_jacobian(x).partialPivLu().solve(r);
    Point trial = wrap(Point(x - step));
    Vec2 rt = difference(raw_apply(trial, true), y);
    double scale = 1.0;
    while (rt.norm() >= r.norm() && scale > 1e-6) {
      scale *= 0.5;
      trial = wrap(Point(x - scale * step));
      rt = difference(raw_apply(trial, true), y);
    }
    if (rt.norm() >= r.norm()) break;
    x = trial;
    r = rt;
  }
  return x;
}

Mat2 MapSystem::raw_jacobian(const Point& x) const {
  switch (kind_) {
    case SystemKind::cat:
      return cat_matrix();
    case SystemKind::perturbed_cat: {
      Mat2 j = cat_matrix();
      j(0, 1) += two_pi * p0_ * std::cos(two_pi * x(1));
      j(1, 0) += two_pi * p0_ * std::cos(two_pi * x(0));
      return j;
    }
    case SystemKind::henon:
      return (Mat2() << -2.0 * p0_ * x(0), 1.0, p1_, 0.0).finished();
    case SystemKind::standard: {
      const double c = p0_ * std::cos(two_pi * x(0));
      return (Mat2() << 1.0 + c, 1.0, c, 1.0).finished();
    }
  }
  return Mat2::Identity();
}

Vec2 MapSystem::raw_displacement(const Point& base, const Vec2& d, bool fwd) const {
  switch (kind_) {
    case SystemKind::cat:
      return fwd ? Vec2(cat_matrix() * d) : Vec2(cat_inverse() * d);
    case SystemKind::perturbed_cat: {
      auto image = [&](const Vec2& e) {
        return Vec2(cat_matrix() * e +
                    p0_ * Vec2(sin_increment(two_pi * base(1), two_pi * e(1)),
                               sin_increment(two_pi * base(0), two_pi * e(0))));
      };
      if (fwd) return image(d);
      // `base` is an image point here; solve image(e) = d around its preimage.
      const Point pre = perturbed_cat_preimage(base);
      auto image_at_pre = [&](const Vec2& e) {
        return Vec2(cat_matrix() * e +
                    p0_ * Vec2(sin_increment(two_pi * pre(1), two_pi * e(1)),
                               sin_increment(two_pi * pre(0), two_pi * e(0))));
      };
      Vec2 e = cat_inverse() * d;
      for (int iter = 0; iter < 50; ++iter) {
        const Vec2 r = image_at_pre(e) - d;
        const Vec2 step = raw_jacobian(Point(pre + e)).partialPivLu().solve(r);
        e -= step;
        if (step.norm() <= 1e-17 * e.norm()) break;
      }
      return e;
    }
    case SystemKind::henon: {
      if (fwd) return Vec2(d(1) - p0_ * d(0) * (2.0 * base(0) + d(0)), p1_ * d(0));
      const double u = base(1) / p1_;
      const double du = d(1) / p1_;
      return Vec2(du, d(0) + p0_ * du * (2.0 * u + du));
    }
    case SystemKind::standard: {
      const double kick = p0_ / two_pi;
      if (fwd) {
        const double ds = kick * sin_increment(two_pi * base(0), two_pi * d(0));
        return Vec2(d(0) + d(1) + ds, d(1) + ds);
      }
      const double u = base(0) - base(1);
      const double du = d(0) - d(1);
      return Vec2(du, d(1) - kick * sin_increment(two_pi * u, two_pi * du));
    }
  }
  return d;
}

Point MapSystem::apply(const Point& x, Direction dir) const {
  const bool fwd = (dir == Direction::forward) != reversed_;
  return raw_apply(wrap(x), fwd);
}

Mat2 MapSystem::jacobian(const Point& x) const {
  const Point p = wrap(x);
  if (!reversed_) return raw_jacobian(p);
  return raw_jacobian(raw_apply(p, false)).inverse();
}

Mat2 MapSystem::inverse_jacobian(const Point& y) const {
  const Point p = wrap(y);
  if (reversed_) return raw_jacobian(p);
  return raw_jacobian(raw_apply(p, false)).inverse();
}

Vec2 MapSystem::displacement_image(const Point& base, const Vec2& d, Direction dir) const {
  const bool fwd = (dir == Direction::forward) != reversed_;
  return raw_displacement(wrap(base), d, fwd);
}

std::array<Point, 2> MapSystem::sampling_box() const {
  if (domain_ == Domain::torus) return {Point(0.0, 0.0), Point(1.0, 1.0)};
  return {Point(-1.5, -0.5), Point(1.5, 0.5)};
}

Point MapSystem::default_point() const {
  if (domain_ == Domain::plane) return Point(0.0, 0.0);
  return Point(0.1234567891, 0.3141592653);
}

std::optional<std::array<double, 2>> MapSystem::analytic_exponents() const {
  if (kind_ != SystemKind::cat) return std::nullopt;
  const double l = std::log((3.0 + std::sqrt(5.0)) / 2.0);
  return std::array<double, 2>{-l, l};
}

double derivative_log_sup(const MapSystem& system, int grid, Execution exec) {
  const auto box = system.sampling_box();
  const Vec2 span = box[1] - box[0];
  std::vector<double> row_max(static_cast<std::size_t>(grid), 0.0);
  for_each_index(
      static_cast<std::size_t>(grid),
      [&](std::size_t i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < grid; ++j) {
          const Point x(box[0](0) + span(0) * (static_cast<double>(i) + 0.5) / grid,
                        box[0](1) + span(1) * (static_cast<double>(j) + 0.5) / grid);
          // Jacobian of the underlying forward map; the bound is symmetric in f, f^-1.
          const Mat2 df = system.reversed() ? system.inverse_jacobian(x) : system.jacobian(x);
          Eigen::JacobiSVD<Mat2> svd(df);
          const double smax = svd.singularValues()(0);
          const double smin = svd.singularValues()(1);
          best = std::max({best, std::log(smax), -std::log(smin)});
        }
        row_max[i] = best;
      },
      exec);
  return *std::max_element(row_max.begin(), row_max.end());
}

OrbitSegment::OrbitSegment(const MapSystem& system, const Point& base, int length) {
  points_.reserve(static_cast<std::size_t>(length) + 1);
  points_.push_back(system.wrap(base));
  for (int j = 0; j < length; ++j) {
    points_.push_back(system.forward(points_.back()));
    if (system.escaped(points_.back())) throw Error(ErrorCode::orbit_escape, "orbit segment diverged", j + 1);
  }
}

OrbitWindow orbit_window(const MapSystem& system, const Point& x, int back, int fwd) {
  OrbitWindow w;
  w.first = -back;
  w.points.resize(static_cast<std::size_t>(back + fwd + 1));
  Point p = system.wrap(x);
  w.points[static_cast<std::size_t>(back)] = p;
  for (int t = 1; t <= fwd; ++t) {
    p = system.forward(p);
    if (system.escaped(p)) throw Error(ErrorCode::orbit_escape, "forward orbit diverged", t);
    w.points[static_cast<std::size_t>(back + t)] = p;
  }
  p = w.points[static_cast<std::size_t>(back)];
  for (int t = 1; t <= back; ++t) {
    p = system.inverse(p);
    if (system.escaped(p)) throw Error(ErrorCode::orbit_escape, "backward orbit diverged", -t);
    w.points[static_cast<std::size_t>(back - t)] = p;
  }
  return w;
}

OrbitWindow orbit_window_from_history(const MapSystem& system, const Point& history, int back, int fwd) {
  OrbitWindow w;
  w.first = -back;
  w.points.resize(static_cast<std::size_t>(back + fwd + 1));
  Point p = system.wrap(history);
  w.points[0] = p;
  for (std::size_t k = 1; k < w.points.size(); ++k) {
    p = system.forward(p);
    if (system.escaped(p)) throw Error(ErrorCode::orbit_escape, "orbit diverged", static_cast<long>(k) - back);
    w.points[k] = p;
  }
  return w;
}

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace pesinlab
