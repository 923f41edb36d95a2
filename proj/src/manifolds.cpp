#include "pesinlab/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "pesinlab/error.hpp"

namespace pesinlab {

const char* kind_name(ManifoldKind k) { return k == ManifoldKind::stable ? "stable" : "unstable"; }

double polyline_length(const std::vector<Point>& polyline) {
  double len = 0.0;
  for (std::size_t k = 1; k < polyline.size(); ++k) len += (polyline[k] - polyline[k - 1]).norm();
  return len;
}

namespace {

double cross(const Vec2& a, const Vec2& b) { return a(0) * b(1) - a(1) * b(0); }

double turning_angle(const Vec2& a, const Vec2& b) { return std::atan2(std::abs(cross(a, b)), a.dot(b)); }

// f^p (or the inverse system's) applied to a wrapped point.
Point power(const MapSystem& g, Point x, int p) {
  for (int i = 0; i < p; ++i) {
    x = g.forward(x);
    if (g.escaped(x)) throw Error(ErrorCode::orbit_escape, "manifold point escaped", i + 1);
  }
  return x;
}

Vec2 expanding_direction(const MapSystem& g, const Point& z, int p) {
  Mat2 m = Mat2::Identity();
  Point q = z;
  for (int i = 0; i < p; ++i) {
    m = g.jacobian(q) * m;
    m /= m.cwiseAbs().maxCoeff();
    q = g.forward(q);
  }
  Eigen::EigenSolver<Mat2> es(m);
  const auto& ev = es.eigenvalues();
  if (ev(0).imag() != 0.0 || ev(1).imag() != 0.0)
    throw Error(ErrorCode::non_hyperbolic_anchor, "anchor has complex Floquet multipliers");
  const int big = std::abs(ev(0).real()) >= std::abs(ev(1).real()) ? 0 : 1;
  Vec2 v = es.eigenvectors().col(big).real().normalized();
  if (v(0) < 0.0 || (v(0) == 0.0 && v(1) < 0.0)) v = -v;
  return v;
}

std::vector<Point> truncate(const std::vector<Point>& poly, double target) {
  std::vector<Point> out{poly.front()};
  double acc = 0.0;
  for (std::size_t k = 1; k < poly.size(); ++k) {
    const double seg = (poly[k] - poly[k - 1]).norm();
    if (acc + seg >= target) {
      const double t = seg > 0.0 ? (target - acc) / seg : 0.0;
      out.push_back(poly[k - 1] + t * (poly[k] - poly[k - 1]));
      return out;
    }
    acc += seg;
    out.push_back(poly[k]);
  }
  return out;
}

}  // namespace

ManifoldPatch grow_manifold(const MapSystem& system, const PeriodicPoint& anchor, ManifoldKind kind,
                            double target_length, double h) {
  if (!(target_length > 0.0) || !(h > 0.0)) throw std::invalid_argument("grow_manifold: need target_length, h > 0");
  if (!anchor.converged() || !anchor.hyperbolic() || anchor.period < 1)
    throw Error(ErrorCode::non_hyperbolic_anchor, "anchor is not a hyperbolic periodic point");
  const MapSystem g = kind == ManifoldKind::unstable ? system : system.inverted();
  const int p = anchor.period;
  const Point z = system.wrap(anchor.z);

  ManifoldPatch patch;
  patch.anchor = anchor;
  patch.kind = kind;
  patch.h = h;
  patch.direction = expanding_direction(g, z, p);
  const double seed = std::min(1e-6, target_length);
  patch.polyline = {z, Point(z + seed * patch.direction)};
  patch.total_length = seed;

  const Point z_image = power(g, z, p);
  while (patch.total_length < target_length && patch.generation < 60) {
    const auto& prev = patch.polyline;
    const auto images = map_indices<Point>(prev.size(), [&](std::size_t k) {
      return k == 0 ? z_image : power(g, g.wrap(prev[k]), p);
    });
    std::vector<Point> next{z};
    // Appends the lifted images strictly between pre-images a and b.
    auto subdivide = [&](auto&& self, const Point& pa, const Point& pb, const Point& ia, const Point& ib,
                         const Point& oa, int depth) -> void {
      const Point ob = oa + g.difference(ib, ia);
      if ((ob - oa).norm() <= h || depth >= 40) return;
      const Point pm = pa + 0.5 * (pb - pa);
      const Point im = power(g, g.wrap(pm), p);
      const Point om = oa + g.difference(im, ia);
      self(self, pa, pm, ia, im, oa, depth + 1);
      next.push_back(om);
      self(self, pm, pb, im, ib, om, depth + 1);
    };
    for (std::size_t k = 0; k + 1 < prev.size(); ++k) {
      const Point oa = next.back();
      subdivide(subdivide, prev[k], prev[k + 1], images[k], images[k + 1], oa, 0);
      next.push_back(oa + g.difference(images[k + 1], images[k]));
    }
    bool blowup = false;
    for (std::size_t k = 1; k + 1 < next.size(); ++k) {
      if (turning_angle(next[k] - next[k - 1], next[k + 1] - next[k]) > std::numbers::pi / 3.0) {
        blowup = true;
        break;
      }
    }
    if (blowup) {
      patch.curvature_blowup = true;
      break;
    }
    patch.polyline = std::move(next);
    ++patch.generation;
    patch.total_length = polyline_length(patch.polyline);
    patch.length_history.push_back(patch.total_length);
  }
  if (patch.total_length > target_length) {
    patch.polyline = truncate(patch.polyline, target_length);
    patch.total_length = polyline_length(patch.polyline);
  }
  return patch;
}

namespace {

Point project_onto(const std::vector<Point>& poly, const Point& x) {
  if (poly.size() == 1) return poly.front();
  Point best = poly.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
    const Vec2 s = poly[k + 1] - poly[k];
    const double ss = s.squaredNorm();
    const double t = ss > 0.0 ? std::clamp((x - poly[k]).dot(s) / ss, 0.0, 1.0) : 0.0;
    const Point c = poly[k] + t * s;
    const double d = (x - c).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double diameter(const std::vector<Vec2>& pts) {
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).squaredNorm());
  return std::sqrt(d);
}

}  // namespace

std::vector<ProfilePoint> contraction_profile(const MapSystem& system, const ManifoldPatch& patch, int n_max,
                                              Execution exec) {
  if (n_max < 0 || n_max > 60) throw std::invalid_argument("contraction_profile: n_max must lie in [0, 60]");
  if (patch.polyline.empty()) throw std::invalid_argument("contraction_profile: empty patch");
  const MapSystem F = patch.kind == ManifoldKind::stable ? system : system.inverted();
  const int p = patch.anchor.period;
  const Point z = patch.polyline.front();
  // Displacements relative to the patch: projecting onto the anchored
  // polyline needs coordinates measured from the anchor.
  std::vector<Vec2> rel(patch.polyline.size());
  for (std::size_t k = 0; k < rel.size(); ++k) rel[k] = patch.polyline[k] - z;
  std::vector<Point> poly_rel(rel.begin(), rel.end());
  const double d0 = diameter(rel);
  if (!(d0 > 0.0)) throw std::invalid_argument("contraction_profile: patch has zero diameter");

  std::vector<ProfilePoint> out{{0, 1.0}};
  std::vector<Vec2> d = rel;
  for (int n = 1; n <= n_max; ++n) {
    d = map_indices<Vec2>(
        d.size(),
        [&](std::size_t k) {
          Vec2 e = d[k];
          Point q = system.wrap(z);
          for (int i = 0; i < p; ++i) {
            e = F.displacement_image(q, e);
            q = F.forward(q);
          }
          return Vec2(project_onto(poly_rel, Point(e)));
        },
        exec);
    out.push_back({n, diameter(d) / d0});
  }
  return out;
}

ContractionFit fit_contraction(const std::vector<ProfilePoint>& profile) {
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : profile)
    if (p.ratio > 0.0) xy.emplace_back(p.n, std::log(p.ratio));
  if (xy.size() < 2) throw Error(ErrorCode::insufficient_data, "contraction fit needs two positive ratios");
  double mx = 0, my = 0;
  for (const auto& [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(xy.size());
  my /= static_cast<double>(xy.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  ContractionFit f;
  const double slope = sxy / sxx;
  f.zeta_bar = -slope;
  double log_c = -std::numeric_limits<double>::infinity();
  double ss_res = 0.0;
  for (const auto& [x, y] : xy) {
    log_c = std::max(log_c, y + f.zeta_bar * x);
    const double e = y - (my + slope * (x - mx));
    ss_res += e * e;
  }
  f.C_bar = std::exp(log_c);
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  for (const auto& [x, y] : xy) f.residuals.push_back(y - (log_c - f.zeta_bar * x));
  return f;
}

namespace {

struct RawCrossing {
  int u;
  int s;
  int shift;
  Point point;
  double angle;
};

struct SegmentSet {
  std::vector<Point> a;
  std::vector<Point> b;
};

// Segments moved so that their first endpoint lies in the unit square.
SegmentSet canonical_segments(const MapSystem& system, const std::vector<Point>& poly) {
  SegmentSet out;
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
    Vec2 shift = Vec2::Zero();
    if (system.domain() == Domain::torus) shift = Vec2(std::floor(poly[k](0)), std::floor(poly[k](1)));
    out.a.push_back(poly[k] - shift);
    out.b.push_back(poly[k + 1] - shift);
  }
  return out;
}

std::vector<Vec2> translations(const MapSystem& system) {
  if (system.domain() == Domain::plane) return {Vec2::Zero()};
  std::vector<Vec2> t;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy) t.emplace_back(dx, dy);
  return t;
}

bool intersect(const Point& p, const Point& p2, const Point& q, const Point& q2, Point& at, double& angle) {
  const Vec2 r = p2 - p;
  const Vec2 s = q2 - q;
  const double denom = cross(r, s);
  if (denom == 0.0) return false;
  const Vec2 qp = q - p;
  const double t = cross(qp, s) / denom;
  const double u = cross(qp, r) / denom;
  constexpr double eps = 1e-12;
  if (t < -eps || t > 1 + eps || u < -eps || u > 1 + eps) return false;
  at = p + t * r;
  angle = std::atan2(std::abs(denom), std::abs(r.dot(s)));
  return true;
}

IntersectionReport merge(const MapSystem& system, std::vector<RawCrossing> raw, const ManifoldPatch& pu,
                         const ManifoldPatch& ps, double min_angle, double radius) {
  std::sort(raw.begin(), raw.end(),
            [](const RawCrossing& x, const RawCrossing& y) { return std::tie(x.u, x.s, x.shift) < std::tie(y.u, y.s, y.shift); });
  std::vector<Point> anchors = pu.anchor.orbit;
  anchors.insert(anchors.end(), ps.anchor.orbit.begin(), ps.anchor.orbit.end());
  anchors.push_back(pu.anchor.z);
  anchors.push_back(ps.anchor.z);
  const double anchor_radius = std::max({pu.h, ps.h, 1e-9});
  IntersectionReport rep;
  for (const auto& c : raw) {
    Crossing x{system.wrap(c.point), c.angle, c.u, c.s, false};
    for (const auto& a : anchors)
      if (system.distance(a, x.point) < anchor_radius) x.at_anchor = true;
    auto& list = c.angle >= min_angle ? rep.transverse : rep.near_tangent;
    bool dup = false;
    for (const auto& k : list)
      if (system.distance(k.point, x.point) < radius) dup = true;
    if (!dup) list.push_back(x);
  }
  return rep;
}

double default_radius(const ManifoldPatch& pu, const ManifoldPatch& ps, double r) {
  return r > 0.0 ? r : std::max({pu.h, ps.h, 1e-12});
}

}  // namespace

IntersectionReport find_transverse_intersections_brute(const MapSystem& system, const ManifoldPatch& patch_u,
                                                       const ManifoldPatch& patch_s, double min_angle,
                                                       double merge_radius) {
  const auto u = canonical_segments(system, patch_u.polyline);
  const auto s = canonical_segments(system, patch_s.polyline);
  const auto shifts = translations(system);
  std::vector<RawCrossing> raw;
  for (std::size_t i = 0; i < u.a.size(); ++i)
    for (std::size_t j = 0; j < s.a.size(); ++j)
      for (std::size_t t = 0; t < shifts.size(); ++t) {
        Point at;
        double angle;
        if (intersect(u.a[i], u.b[i], s.a[j] + shifts[t], s.b[j] + shifts[t], at, angle))
          raw.push_back({static_cast<int>(i), static_cast<int>(j), static_cast<int>(t), at, angle});
      }
  return merge(system, std::move(raw), patch_u, patch_s, min_angle, default_radius(patch_u, patch_s, merge_radius));
}

IntersectionReport find_transverse_intersections(const MapSystem& system, const ManifoldPatch& patch_u,
                                                 const ManifoldPatch& patch_s, double min_angle,
                                                 double merge_radius, Execution exec) {
  const auto u = canonical_segments(system, patch_u.polyline);
  const auto s = canonical_segments(system, patch_s.polyline);
  const auto shifts = translations(system);
  if (u.a.empty() || s.a.empty()) return {};

  // Bucket every translated stable segment by its bounding box.
  Point lo = s.a[0], hi = s.a[0];
  double longest = 0.0;
  for (std::size_t j = 0; j < s.a.size(); ++j) {
    for (const auto& t : shifts) {
      lo = lo.cwiseMin(Point(s.a[j] + t)).cwiseMin(Point(s.b[j] + t));
      hi = hi.cwiseMax(Point(s.a[j] + t)).cwiseMax(Point(s.b[j] + t));
    }
    longest = std::max(longest, (s.b[j] - s.a[j]).norm());
  }
  const Vec2 span = (hi - lo).cwiseMax(Vec2(1e-12, 1e-12));
  const double cell = std::max({longest, span.maxCoeff() / 512.0, 1e-12});
  const long nx = static_cast<long>(std::ceil(span(0) / cell)) + 1;
  const long ny = static_cast<long>(std::ceil(span(1) / cell)) + 1;
  auto cell_x = [&](double x) { return std::clamp(static_cast<long>(std::floor((x - lo(0)) / cell)), 0L, nx - 1); };
  auto cell_y = [&](double y) { return std::clamp(static_cast<long>(std::floor((y - lo(1)) / cell)), 0L, ny - 1); };
  std::vector<std::vector<std::pair<int, int>>> grid(static_cast<std::size_t>(nx * ny));
  for (std::size_t j = 0; j < s.a.size(); ++j) {
    for (std::size_t t = 0; t < shifts.size(); ++t) {
      const Point a = s.a[j] + shifts[t], b = s.b[j] + shifts[t];
      for (long cx = cell_x(std::min(a(0), b(0))); cx <= cell_x(std::max(a(0), b(0))); ++cx)
        for (long cy = cell_y(std::min(a(1), b(1))); cy <= cell_y(std::max(a(1), b(1))); ++cy)
          grid[static_cast<std::size_t>(cx * ny + cy)].emplace_back(static_cast<int>(j), static_cast<int>(t));
    }
  }

  const auto per_u = map_indices<std::vector<RawCrossing>>(
      u.a.size(),
      [&](std::size_t i) {
        std::vector<RawCrossing> found;
        std::vector<std::pair<int, int>> candidates;
        const Point& a = u.a[i];
        const Point& b = u.b[i];
        for (long cx = cell_x(std::min(a(0), b(0))); cx <= cell_x(std::max(a(0), b(0))); ++cx)
          for (long cy = cell_y(std::min(a(1), b(1))); cy <= cell_y(std::max(a(1), b(1))); ++cy) {
            const auto& bucket = grid[static_cast<std::size_t>(cx * ny + cy)];
            candidates.insert(candidates.end(), bucket.begin(), bucket.end());
          }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        for (const auto& [j, t] : candidates) {
          Point at;
          double angle;
          if (intersect(a, b, s.a[static_cast<std::size_t>(j)] + shifts[static_cast<std::size_t>(t)],
                        s.b[static_cast<std::size_t>(j)] + shifts[static_cast<std::size_t>(t)], at, angle))
            found.push_back({static_cast<int>(i), j, t, at, angle});
        }
        return found;
      },
      exec);
  std::vector<RawCrossing> raw;
  for (const auto& v : per_u) raw.insert(raw.end(), v.begin(), v.end());
  return merge(system, std::move(raw), patch_u, patch_s, min_angle, default_radius(patch_u, patch_s, merge_radius));
}

namespace {

// Marks every grid cell (unit cells in scaled coordinates) that the segment
// a-b passes through, by exact cell traversal.
template <class Mark>
void traverse(const Point& a, const Point& b, Mark&& mark) {
  long cx = static_cast<long>(std::floor(a(0)));
  long cy = static_cast<long>(std::floor(a(1)));
  const long ex = static_cast<long>(std::floor(b(0)));
  const long ey = static_cast<long>(std::floor(b(1)));
  mark(cx, cy);
  const Vec2 d = b - a;
  const int sx = d(0) > 0 ? 1 : (d(0) < 0 ? -1 : 0);
  const int sy = d(1) > 0 ? 1 : (d(1) < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  double tx = sx == 0 ? inf : ((sx > 0 ? cx + 1 - a(0) : a(0) - cx) / std::abs(d(0)));
  double ty = sy == 0 ? inf : ((sy > 0 ? cy + 1 - a(1) : a(1) - cy) / std::abs(d(1)));
  const double dx = sx == 0 ? inf : 1.0 / std::abs(d(0));
  const double dy = sy == 0 ? inf : 1.0 / std::abs(d(1));
  const long steps = std::abs(ex - cx) + std::abs(ey - cy);
  for (long k = 0; k < steps; ++k) {
    if (tx < ty) {
      cx += sx;
      tx += dx;
    } else {
      cy += sy;
      ty += dy;
    }
    mark(cx, cy);
  }
}

double coverage_in(const std::vector<Point>& poly, int grid_n, const Point& lo, const Vec2& span, bool periodic) {
  if (grid_n < 1) throw std::invalid_argument("coverage: grid_n must be >= 1");
  std::vector<char> hit(static_cast<std::size_t>(grid_n) * static_cast<std::size_t>(grid_n), 0);
  auto mark = [&](long cx, long cy) {
    if (periodic) {
      cx = ((cx % grid_n) + grid_n) % grid_n;
      cy = ((cy % grid_n) + grid_n) % grid_n;
    } else if (cx < 0 || cy < 0 || cx >= grid_n || cy >= grid_n) {
      return;
    }
    hit[static_cast<std::size_t>(cx * grid_n + cy)] = 1;
  };
  auto scaled = [&](const Point& p) {
    return Point((p(0) - lo(0)) / span(0) * grid_n, (p(1) - lo(1)) / span(1) * grid_n);
  };
  if (poly.size() == 1) {
    const Point q = scaled(poly[0]);
    mark(static_cast<long>(std::floor(q(0))), static_cast<long>(std::floor(q(1))));
  }
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) traverse(scaled(poly[k]), scaled(poly[k + 1]), mark);
  std::size_t count = 0;
  for (char c : hit) count += static_cast<std::size_t>(c);
  return static_cast<double>(count) / static_cast<double>(hit.size());
}

}  // namespace

double closure_coverage(const MapSystem& system, const ManifoldPatch& patch, int grid_n) {
  if (system.domain() != Domain::torus)
    throw Error(ErrorCode::domain_unsupported, "closure_coverage needs a torus system; use a bounding box");
  return coverage_in(patch.polyline, grid_n, Point(0, 0), Vec2(1, 1), true);
}

double closure_coverage_box(const ManifoldPatch& patch, int grid_n, const std::array<Point, 2>& box) {
  return coverage_in(patch.polyline, grid_n, box[0], box[1] - box[0], false);
}

double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b) {
  auto one_way = [](const std::vector<Point>& from, const std::vector<Point>& to) {
    double worst = 0.0;
    for (const auto& p : from) worst = std::max(worst, (project_onto(to, p) - p).norm());
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

void write_polyline_csv(std::ostream& out, const MapSystem& system, const ManifoldPatch& patch) {
  out << "index,x,y\n" << std::setprecision(17);
  for (std::size_t k = 0; k < patch.polyline.size(); ++k) {
    const Point p = system.wrap(patch.polyline[k]);
    out << k << ',' << p(0) << ',' << p(1) << '\n';
  }
}

}  // namespace pesinlab
