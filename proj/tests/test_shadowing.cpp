#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "pesinlab/banded.hpp"
#include "pesinlab/error.hpp"
#include "pesinlab/pesin.hpp"
#include "pesinlab/shadowing.hpp"
#include "oracles.hpp"

using namespace pesinlab;
using namespace pesinlab::oracle;

namespace {

const double log_lambda = std::log((3.0 + std::sqrt(5.0)) / 2.0);

}  // namespace

TEST_CASE("banded LU matches a dense solve") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 30, kl = 2 + trial % 4, ku = 1 + trial % 3;
    BandedMatrix b(n, kl, ku);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = std::max(0, i - kl); j <= std::min(n - 1, i + ku); ++j) dense(i, j) = b.at(i, j) = u(rng);
    Eigen::VectorXd rhs(n);
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = rhs(i) = u(rng);
    b.factor();
    b.solve(x);
    const Eigen::VectorXd ref = dense.partialPivLu().solve(rhs);
    for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - ref(i)) < 1e-9 * (1 + std::abs(ref(i))));
  }
  BandedMatrix singular(3, 1, 1);
  singular.at(0, 0) = 1;
  singular.at(1, 0) = 1;
  CHECK_THROWS_AS(singular.factor(), Error);
}

TEST_CASE("exact orbit needs no correction") {
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto po = exact_pseudo_orbit(s, Point(0.2, 0.7), 10, 3);
  CHECK(po.max_jump() < 1e-15);
  const auto r = newton_shadow(s, po, 1e-12, 20);
  CHECK(r.converged());
  CHECK(r.newton_iterations == 0);
  CHECK(r.max_deviation() == 0.0);
  CHECK(r.deviations.size() == 33);
}

TEST_CASE("cat map: one Newton iteration on any pseudo-orbit") {
  const auto cat = MapSystem::cat();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0), small(-1e-3, 1e-3);
  for (int trial = 0; trial < 5; ++trial) {
    PseudoOrbit po;
    Point p(u(rng), u(rng));
    for (int i = 0; i < 6; ++i) {
      po.segments.push_back({p, 7 + i});
      for (int j = 0; j < 7 + i; ++j) p = cat.forward(p);
      p = cat.wrap(Point(p + Vec2(small(rng), small(rng))));
    }
    po.measure_jumps(cat);
    const auto r = newton_shadow(cat, po, 1e-12, 20);
    CHECK(r.converged());
    CHECK(r.newton_iterations == 1);
    CHECK(orbit_residual(cat, r.orbit, false) < 1e-12);
  }
  const auto periodic = newton_shadow(cat, single_jump(cat, 1e-4), 1e-12, 20);
  CHECK(periodic.converged());
  CHECK(periodic.newton_iterations == 1);
}

TEST_CASE("single jump deviations match the closed-form oracle") {
  const auto cat = MapSystem::cat();
  std::vector<LipschitzSample> fit;
  for (double delta : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const auto oracle = single_jump_oracle(delta);
    const auto po = single_jump(cat, delta);
    CHECK(po.max_jump() == doctest::Approx(delta).epsilon(1e-6));
    const auto r = newton_shadow(cat, po, 1e-13, 20);
    REQUIRE(r.converged());
    REQUIRE(r.deviations.size() == 41);
    for (int j = 0; j <= 40; ++j) CHECK(std::abs(r.deviations[j].value - oracle.deviations[j]) < 1e-10);
    CHECK(std::abs(r.max_deviation() - oracle.max_deviation) < 1e-10);
    CHECK(r.max_deviation() <= 1.618034 * delta);
    fit.push_back({delta, r.max_deviation()});

    const double L = oracle.max_deviation / delta;
    const auto check = verify_exponential_shadowing(po, r, 2 * L * delta, 0.9 * log_lambda);
    CHECK(check.pass);
    CHECK(check.worst_margin > 0);
  }
  const auto lf = fit_lipschitz(fit);
  const double oracle_l = single_jump_oracle(1.0).max_deviation;
  CHECK(std::abs(lf.L_hat - oracle_l) < 0.2 * oracle_l);
  CHECK(lf.r2 > 0.999);
}

TEST_CASE("newton_shadow is a fixed point on its own output") {
  const auto s = MapSystem::perturbed_cat(0.05);
  PseudoOrbit po = exact_pseudo_orbit(s, Point(0.4, 0.1), 12, 3);
  po.segments[2].base = s.wrap(Point(po.segments[2].base + Vec2(3e-4, -2e-4)));
  po.measure_jumps(s);
  const auto r = newton_shadow(s, po, 1e-12, 30);
  REQUIRE(r.converged());
  CHECK(orbit_residual(s, r.orbit, false) < 1e-12);
  PseudoOrbit again = po;
  for (int i = 0; i < again.size(); ++i) {
    auto& seg = again.segments[static_cast<std::size_t>(i)];
    seg.points.assign(r.orbit.begin() + 12 * i, r.orbit.begin() + 12 * i + 13);
    seg.base = seg.points.front();
  }
  again.measure_jumps(s);
  const auto r2 = newton_shadow(s, again, 1e-12, 30);
  for (std::size_t k = 0; k < r.orbit.size(); ++k) CHECK(s.distance(r.orbit[k], r2.orbit[k]) <= 1e-12);
}

TEST_CASE("verify_exponential_shadowing formula") {
  PseudoOrbit po;
  po.segments.push_back({Point(0, 0), 4});
  ShadowResult r;
  for (int j = 0; j <= 4; ++j) r.deviations.push_back({0, j, 0.0});
  const auto zero = verify_exponential_shadowing(po, r, 1e-9, 3.0);
  CHECK(zero.pass);
  r.deviations[2].value = 0.5;
  const auto c = verify_exponential_shadowing(po, r, 1.0, 0.0);
  CHECK(c.margins[2] == doctest::Approx(0.5));
  const auto d = verify_exponential_shadowing(po, r, 1.0, 1.0);
  CHECK(d.margins[2] == doctest::Approx(std::exp(-2.0) - 0.5));
  CHECK_FALSE(d.pass);
}

TEST_CASE("non-hyperbolic windows are ill-conditioned") {
  const auto shear = MapSystem::standard(0.0);
  PseudoOrbit po;
  po.segments.push_back({Point(0.3, 0.26), 4});
  po.period = 1;
  const auto r = newton_shadow(shear, po, 1e-12, 10);
  CHECK(r.status == SolveStatus::ill_conditioned);
}

TEST_CASE("large corrections are reported as divergence") {
  const auto cat = MapSystem::cat();
  PseudoOrbit po;
  po.segments.push_back({Point(0.5, 0.5), 1});
  po.period = 1;
  const auto r = newton_shadow(cat, po, 1e-12, 10);
  CHECK(r.status == SolveStatus::newton_diverged);
  CHECK_FALSE(r.orbit.empty());
}

TEST_CASE("close_orbit") {
  const auto cat = MapSystem::cat();
  const auto p = close_orbit(cat, Point(1e-5, 1e-5), 3);
  REQUIRE(p.converged());
  CHECK(cat.distance(p.z, Point(0, 0)) < 1e-12);
  CHECK(p.floquet_log_moduli[0] == doctest::Approx(-3 * log_lambda).epsilon(1e-12));
  CHECK(p.floquet_log_moduli[1] == doctest::Approx(3 * log_lambda).epsilon(1e-12));
  CHECK(p.hyperbolic());
  CHECK(p.closing_deviations.size() == 4);

  // (2/5, 1/5) has period 2: A (2/5, 1/5) = (1, 3/5) = (0, 3/5), A (0, 3/5) = (3/5, 3/5)?
  // Period-2 points solve (A^2 - I) x in Z^2; take x = (A^2 - I)^{-1} (1, 0).
  const Mat2 a2m = (Mat2() << 4, 3, 3, 1).finished();
  const Point q = cat.wrap(Point(a2m.inverse() * Vec2(1, 0)));
  const auto exact = close_orbit(cat, q, 2);
  CHECK(exact.newton_iterations <= 1);
  CHECK(cat.distance(exact.z, q) < 1e-14);
  for (double d : exact.closing_deviations) CHECK(d < 1e-14);

  // Large horizons: log-moduli stay finite and antisymmetric.
  const auto f = floquet_log_moduli(cat, Point(0.1, 0.2), 1500);
  CHECK(f[1] == doctest::Approx(1500 * log_lambda).epsilon(1e-12));
  CHECK(std::abs(f[0] + f[1]) < 1e-8);
}

TEST_CASE("cat census counts trace(A^n) - 2 for small n") {
  const auto cat = MapSystem::cat();
  const auto c1 = periodic_census(cat, 1, 64);
  CHECK(c1.points.size() == 1);
  const auto c2 = periodic_census(cat, 2, 128);
  CHECK(c2.points.size() == 5);
  const auto c3 = periodic_census(cat, 3, 128);
  CHECK(c3.points.size() == 16);
  for (const auto& p : c3.points) {
    CHECK(std::abs(p.floquet_log_moduli[0] + 3 * log_lambda) < 1e-8);
    CHECK(std::abs(p.floquet_log_moduli[1] - 3 * log_lambda) < 1e-8);
    CHECK(p.residual < 1e-12);
  }
  const auto serial = periodic_census(cat, 3, 128, 1e-6, 1e-12, Execution::serial);
  REQUIRE(serial.points.size() == c3.points.size());
  for (std::size_t i = 0; i < serial.points.size(); ++i) CHECK(serial.points[i].z == c3.points[i].z);
}

TEST_CASE("fit_rates and fit_lipschitz") {
  std::vector<RateSample> exact;
  for (int s = 0; s < 10; ++s) exact.push_back({s, 0.3 * std::exp(-0.7 * s)});
  const auto f = fit_rates(exact);
  CHECK(std::abs(f.theta_hat - 0.7) < 1e-12);
  CHECK(std::abs(f.eta_hat - 0.3) < 1e-12);
  CHECK(f.r2 == doctest::Approx(1.0));
  std::vector<RateSample> flat;
  for (int s = 0; s < 6; ++s) flat.push_back({s, 2e-3});
  CHECK(std::abs(fit_rates(flat).theta_hat) < 1e-6);
  CHECK_THROWS_AS(fit_rates({{0, 1.0}, {1, 0.5}}), Error);
  std::vector<RateSample> zeros;
  for (int s = 0; s < 5; ++s) zeros.push_back({s, 0.0});
  CHECK(fit_rates(zeros).eta_hat == doctest::Approx(1e-15));

  const auto l = fit_lipschitz({{1e-3, 2e-3}, {1e-4, 2e-4}, {1e-5, 2e-5}});
  CHECK(l.L_hat == doctest::Approx(2.0));
  CHECK(l.r2 == doctest::Approx(1.0));
}

TEST_CASE("recurrent pseudo-orbits") {
  const auto cat = MapSystem::cat();
  RecurrenceOptions o;
  o.min_length = 5;
  o.max_segments = 4;
  const auto po = build_recurrent_pseudo_orbit(cat, Point(0.3, 0.1), [](const Point&) { return true; }, o);
  CHECK(po.size() == 4);
  for (const auto& s : po.segments) CHECK(s.length == 5);
  for (double j : po.jump_sizes) CHECK(j < 1e-15);

  // x0 on a period-2 orbit closes onto itself.
  const Mat2 a2m = (Mat2() << 4, 3, 3, 1).finished();
  const Point q = cat.wrap(Point(a2m.inverse() * Vec2(1, 0)));
  RecurrenceOptions per;
  per.min_length = 2;
  per.max_segments = 3;
  per.periodic = true;
  per.delta = 1e-9;
  per.pool = {q};
  const auto pp = build_recurrent_pseudo_orbit(cat, q, [](const Point&) { return true; }, per);
  REQUIRE(pp.period.has_value());
  CHECK(*pp.period == 3);
  CHECK(pp.jump_sizes.size() == 3);
  CHECK(pp.max_jump() < 1e-9);

  RecurrenceOptions none;
  none.budget = 1000;
  none.pool = {Point(0.5, 0.5)};
  none.delta = 1e-9;
  try {
    build_recurrent_pseudo_orbit(cat, Point(0.3, 0.1), [](const Point&) { return true; }, none);
    FAIL("expected PoolExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::pool_exhausted);
  }
  try {
    build_recurrent_pseudo_orbit(cat, Point(0.3, 0.1), [](const Point& p) { return p(0) < 0.3 + 1e-14 && p(0) > 0.3 - 1e-14; }, none);
    FAIL("expected NoRecurrence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::no_recurrence);
  }
}

TEST_CASE("perturbed cat pool-based pseudo-orbit shadows") {
  const auto s = MapSystem::perturbed_cat(0.05);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RecurrenceOptions o;
  o.delta = 1e-3;
  o.min_length = 20;
  o.max_segments = 5;
  for (int i = 0; i < 10000; ++i) o.pool.emplace_back(u(rng), u(rng));
  const auto po = build_recurrent_pseudo_orbit(s, Point(0.25, 0.5), [](const Point&) { return true; }, o);
  CHECK(po.max_jump() < 1e-3);
  CHECK(po.max_jump() > 0);
  const auto r = newton_shadow(s, po, 1e-12, 30);
  REQUIRE(r.converged());
  CHECK(orbit_residual(s, r.orbit, false) < 1e-12);
  CHECK(r.max_deviation() < 10 * po.max_jump());
}

TEST_CASE("perturbed cat closing rates") {
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto events = find_recurrences(s, Point(0.123, 0.456), 20000, 20, 200, 0.02, 60);
  REQUIRE(events.size() >= 50);
  std::vector<RateSample> samples;
  int closed = 0;
  for (const auto& e : events) {
    Point x(0.123, 0.456);
    for (long t = 0; t < e.time; ++t) x = s.forward(x);
    const auto p = close_orbit(s, x, e.n);
    if (!p.converged()) continue;
    ++closed;
    for (int j = 0; j <= e.n; ++j)
      if (p.closing_deviations[j] > 1e-12) samples.push_back({std::min(j, e.n - j), p.closing_deviations[j]});
  }
  CHECK(closed >= 50);
  const auto f = fit_rates(samples);
  MESSAGE("theta_hat " << f.theta_hat << " r2 " << f.r2);
  CHECK(f.theta_hat >= 0.5);
  CHECK(f.r2 >= 0.9);
}
