#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "pesinlab/error.hpp"
#include "pesinlab/manifolds.hpp"

using namespace pesinlab;

namespace {

const double kLogLambda = std::log((3.0 + std::sqrt(5.0)) / 2.0);

PeriodicPoint fixed_origin(const MapSystem& s) {
  auto p = close_orbit(s, Point(0, 0), 1);
  REQUIRE(p.converged());
  return p;
}

double angle_between(const Vec2& a, const Vec2& b) {
  return std::atan2(std::abs(a(0) * b(1) - a(1) * b(0)), std::abs(a.dot(b)));
}

}  // namespace

TEST_CASE("cat unstable branch is the eigenline") {
  const auto cat = MapSystem::cat();
  const auto pu = grow_manifold(cat, fixed_origin(cat), ManifoldKind::unstable, 10.0, 0.05);
  CHECK(pu.polyline.front() == Point(0, 0));
  CHECK(pu.total_length == doctest::Approx(10.0).epsilon(1e-12));
  const double slope = (std::sqrt(5.0) - 1.0) / 2.0;
  double worst = 0.0;
  for (const auto& p : pu.polyline)
    if (p(0) > 0) worst = std::max(worst, std::abs(p(1) / p(0) - slope));
  CHECK(worst < 1e-9);
  for (std::size_t k = 1; k < pu.polyline.size(); ++k) CHECK((pu.polyline[k] - pu.polyline[k - 1]).norm() <= 0.05);
  // each generation multiplies the arc length by the expanding eigenvalue
  REQUIRE(pu.length_history.size() >= 3);
  for (std::size_t g = 1; g < pu.length_history.size(); ++g)
    CHECK(pu.length_history[g] / pu.length_history[g - 1] == doctest::Approx(2.618).epsilon(1e-3 / 2.618));
  CHECK_FALSE(pu.curvature_blowup);
}

TEST_CASE("seed segment only") {
  const auto cat = MapSystem::cat();
  const auto p = grow_manifold(cat, fixed_origin(cat), ManifoldKind::unstable, 1e-6, 0.01);
  CHECK(p.generation == 0);
  CHECK(p.polyline.size() == 2);
  CHECK(p.total_length == doctest::Approx(1e-6));
  CHECK(closure_coverage(cat, p, 64) == doctest::Approx(1.0 / 4096));
}

TEST_CASE("tangent at the anchor follows the Floquet direction") {
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto anchor = fixed_origin(s);
  for (auto kind : {ManifoldKind::stable, ManifoldKind::unstable}) {
    const auto p = grow_manifold(s, anchor, kind, 0.5, 0.01);
    CHECK((p.polyline.front() - anchor.z).norm() < 1e-10);
    CHECK(angle_between(p.polyline[1] - p.polyline[0], p.direction) < 1e-4);
  }
}

TEST_CASE("cat stable patch contracts by the eigenvalue") {
  const auto cat = MapSystem::cat();
  const auto ps = grow_manifold(cat, fixed_origin(cat), ManifoldKind::stable, 0.5, 0.05);
  const auto prof = contraction_profile(cat, ps, 40);
  REQUIRE(prof.size() == 41);
  CHECK(prof[0].ratio == 1.0);
  for (const auto& p : prof) CHECK(std::abs(p.ratio - std::exp(-kLogLambda * p.n)) < 1e-9);
  const auto fit = fit_contraction(prof);
  CHECK(fit.zeta_bar == doctest::Approx(kLogLambda).epsilon(1e-9));
  CHECK(fit.C_bar == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(contraction_profile(cat, ps, 40, Execution::serial).back().ratio == prof.back().ratio);
}

TEST_CASE("perturbed stable patch admits a contraction bound") {
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto ps = grow_manifold(s, fixed_origin(s), ManifoldKind::stable, 0.3, 0.01);
  const auto prof = contraction_profile(s, ps, 30);
  const auto fit = fit_contraction(prof);
  CHECK(fit.zeta_bar >= 0.8);
  CHECK(fit.C_bar <= 2.0);
  for (double r : fit.residuals) CHECK(r <= 1e-12);
}

TEST_CASE("homoclinic crossings of the cat map are orthogonal") {
  const auto cat = MapSystem::cat();
  const auto anchor = fixed_origin(cat);
  const auto pu = grow_manifold(cat, anchor, ManifoldKind::unstable, 3.0, 0.05);
  const auto ps = grow_manifold(cat, anchor, ManifoldKind::stable, 3.0, 0.05);
  const auto rep = find_transverse_intersections(cat, pu, ps);
  int homoclinic = 0;
  for (const auto& c : rep.transverse) {
    CHECK(std::abs(c.angle - std::numbers::pi / 2) < 1e-6);
    if (!c.at_anchor) ++homoclinic;
  }
  CHECK(homoclinic > 0);
  CHECK(rep.near_tangent.empty());
}

TEST_CASE("tangential and disjoint patches") {
  const auto cat = MapSystem::cat();
  const auto pu = grow_manifold(cat, fixed_origin(cat), ManifoldKind::unstable, 0.5, 0.05);
  const auto same = find_transverse_intersections(cat, pu, pu);
  CHECK(same.transverse.empty());
  // period-2 point far from the origin: short patches do not meet
  const auto p2 = close_orbit(cat, Point(0.8, 0.6), 2);
  REQUIRE(p2.converged());
  const auto a = grow_manifold(cat, fixed_origin(cat), ManifoldKind::unstable, 0.05, 0.01);
  const auto b = grow_manifold(cat, p2, ManifoldKind::stable, 0.05, 0.01);
  CHECK(find_transverse_intersections(cat, a, b).transverse.empty());
  CHECK(find_transverse_intersections(cat, a, b).near_tangent.empty());
}

TEST_CASE("bucketed intersections agree with all pairs") {
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto anchor = fixed_origin(s);
  const auto pu = grow_manifold(s, anchor, ManifoldKind::unstable, 4.0, 0.01);
  const auto ps = grow_manifold(s, anchor, ManifoldKind::stable, 4.0, 0.01);
  REQUIRE(pu.polyline.size() <= 1001);
  const auto fast = find_transverse_intersections(s, pu, ps);
  const auto slow = find_transverse_intersections_brute(s, pu, ps);
  REQUIRE(fast.transverse.size() == slow.transverse.size());
  CHECK(fast.transverse.size() > 1);
  for (std::size_t i = 0; i < fast.transverse.size(); ++i) {
    CHECK(fast.transverse[i].point == slow.transverse[i].point);
    CHECK(fast.transverse[i].angle == slow.transverse[i].angle);
  }
  CHECK(fast.near_tangent.size() == slow.near_tangent.size());
  const auto serial = find_transverse_intersections(s, pu, ps, 0.1, -1.0, Execution::serial);
  CHECK(serial.transverse.size() == fast.transverse.size());
}

TEST_CASE("unstable closure coverage") {
  const auto cat = MapSystem::cat();
  const auto anchor = fixed_origin(cat);
  double prev = 0.0;
  for (double len = 10.0; len <= 1000.0; len *= 2) {
    const double c = closure_coverage(cat, grow_manifold(cat, anchor, ManifoldKind::unstable, len, 0.05), 64);
    CHECK(c >= prev);
    prev = c;
  }
  const auto big = grow_manifold(cat, anchor, ManifoldKind::unstable, 1000.0, 0.05);
  CHECK(closure_coverage(cat, big, 64) >= 0.99);
}

TEST_CASE("coverage on the plane needs a box") {
  const auto h = MapSystem::henon();
  const auto anchor = close_orbit(h, Point(0.63, 0.19), 1);
  REQUIRE(anchor.converged());
  const auto pu = grow_manifold(h, anchor, ManifoldKind::unstable, 5.0, 0.01);
  CHECK_THROWS_AS(closure_coverage(h, pu, 64), Error);
  const double c = closure_coverage_box(pu, 64, {Point(-1.5, -0.5), Point(1.5, 0.5)});
  CHECK(c > 0.0);
  CHECK(c < 1.0);
}

TEST_CASE("local invariance of a stable patch") {
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto ps = grow_manifold(s, fixed_origin(s), ManifoldKind::stable, 0.4, 0.01);
  const Point z = ps.polyline.front();
  std::vector<Point> image{z};
  Point q = s.wrap(z);
  const Point fz = s.forward(q);
  for (std::size_t k = 1; k < ps.polyline.size(); ++k)
    image.push_back(z + s.difference(s.forward(s.wrap(ps.polyline[k])), fz));
  std::vector<Point> ref;
  const double len = polyline_length(image);
  double acc = 0.0;
  ref.push_back(ps.polyline[0]);
  for (std::size_t k = 1; k < ps.polyline.size() && acc < len; ++k) {
    acc += (ps.polyline[k] - ps.polyline[k - 1]).norm();
    ref.push_back(ps.polyline[k]);
  }
  CHECK(hausdorff_distance(image, ref) <= 2 * ps.h);
}

TEST_CASE("stable patch of f is the unstable patch of the inverse") {
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto inv = s.inverted();
  const auto ps = grow_manifold(s, fixed_origin(s), ManifoldKind::stable, 1.0, 0.01);
  const auto pu = grow_manifold(inv, fixed_origin(inv), ManifoldKind::unstable, 1.0, 0.01);
  CHECK(hausdorff_distance(ps.polyline, pu.polyline) <= 2 * ps.h);
}

TEST_CASE("non-hyperbolic anchors are rejected") {
  PeriodicPoint p;
  p.z = Point(0, 0);
  p.period = 1;
  p.hyperbolicity_margin = 0.0;
  try {
    grow_manifold(MapSystem::cat(), p, ManifoldKind::unstable, 1.0, 0.1);
    FAIL("expected NonHyperbolicAnchor");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::non_hyperbolic_anchor);
  }
}

TEST_CASE("polyline csv") {
  const auto cat = MapSystem::cat();
  const auto pu = grow_manifold(cat, fixed_origin(cat), ManifoldKind::unstable, 2.0, 0.5);
  std::ostringstream out;
  write_polyline_csv(out, cat, pu);
  const auto text = out.str();
  CHECK(text.rfind("index,x,y\n0,0,0\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == pu.polyline.size() + 1);
}
