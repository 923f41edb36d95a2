#include "pesinlab/shadowing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pesinlab/banded.hpp"
#include "pesinlab/cocycle.hpp"
#include "pesinlab/error.hpp"
#include "pesinlab/spatial.hpp"

namespace pesinlab {

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::newton_diverged:
      return "NewtonDiverged";
    case SolveStatus::ill_conditioned:
      return "IllConditioned";
  }
  return "unknown";
}

double ShadowResult::max_deviation() const {
  double m = 0.0;
  for (const auto& d : deviations) m = std::max(m, d.value);
  return m;
}

double orbit_residual(const MapSystem& system, const std::vector<Point>& orbit, bool periodic) {
  double r = 0.0;
  const std::size_t n = orbit.size();
  const std::size_t links = periodic ? n : n - 1;
  for (std::size_t j = 0; j < links; ++j) r = std::max(r, system.distance(system.forward(orbit[j]), orbit[(j + 1) % n]));
  return r;
}

namespace {

Vec2 perp(const Vec2& v) { return Vec2(-v(1), v(0)); }

struct Residual {
  std::vector<Vec2> f;  // f(y_j) - y_{j+1}
  double max = 0.0;
};

Residual residual_of(const MapSystem& system, const std::vector<Point>& y, bool periodic) {
  Residual r;
  const std::size_t n = y.size();
  const std::size_t links = periodic ? n : n - 1;
  r.f.resize(links);
  for (std::size_t j = 0; j < links; ++j) {
    r.f[j] = system.difference(system.forward(y[j]), y[(j + 1) % n]);
    r.max = std::max(r.max, r.f[j].norm());
  }
  return r;
}

// Newton system in the variables delta_j. Periodic windows interleave the
// unknowns (0, N-1, 1, N-2, ...) so that the cyclic coupling stays banded.
class NewtonSystem {
 public:
  NewtonSystem(std::size_t points, bool periodic) : n_(points), periodic_(periodic), pos_(points) {
    if (periodic_) {
      std::size_t lo = 0;
      std::size_t hi = n_ - 1;
      for (std::size_t k = 0; k < n_; ++k) pos_[(k % 2 == 0) ? lo++ : hi--] = static_cast<int>(k);
    } else {
      for (std::size_t k = 0; k < n_; ++k) pos_[k] = static_cast<int>(k);
    }
  }

  int var(std::size_t j, int c) const { return 2 * pos_[j] + c; }
  int bandwidth() const { return periodic_ ? 5 : 2; }

  std::vector<Vec2> solve(const MapSystem& system, const std::vector<Point>& y, const Residual& r,
                          const Vec2& start_normal, const Vec2& end_normal, double& smallest_pivot) const {
    const int size = static_cast<int>(2 * n_);
    BandedMatrix a(size, bandwidth(), bandwidth());
    std::vector<double> rhs(static_cast<std::size_t>(size), 0.0);
    const std::size_t links = r.f.size();
    // Row of equation j, component c: periodic rows sit with their own
    // unknowns; non-periodic rows are shifted by the start condition.
    auto row = [&](std::size_t j, int c) { return periodic_ ? var(j, c) : 1 + 2 * static_cast<int>(j) + c; };
    for (std::size_t j = 0; j < links; ++j) {
      const Mat2 d = system.jacobian(y[j]);
      const std::size_t next = (j + 1) % n_;
      for (int c = 0; c < 2; ++c) {
        const int i = row(j, c);
        a.at(i, var(j, 0)) += d(c, 0);
        a.at(i, var(j, 1)) += d(c, 1);
        a.at(i, var(next, c)) -= 1.0;
        rhs[static_cast<std::size_t>(i)] = -r.f[j](c);
      }
    }
    if (!periodic_) {
      a.at(0, var(0, 0)) = start_normal(0);
      a.at(0, var(0, 1)) = start_normal(1);
      a.at(size - 1, var(n_ - 1, 0)) = end_normal(0);
      a.at(size - 1, var(n_ - 1, 1)) = end_normal(1);
    }
    a.factor(1e-14);
    smallest_pivot = a.smallest_pivot();
    a.solve(rhs);
    std::vector<Vec2> delta(n_);
    for (std::size_t j = 0; j < n_; ++j)
      delta[j] = Vec2(rhs[static_cast<std::size_t>(var(j, 0))], rhs[static_cast<std::size_t>(var(j, 1))]);
    return delta;
  }

 private:
  std::size_t n_;
  bool periodic_;
  std::vector<int> pos_;
};

std::vector<Point> seed_orbit(const MapSystem& system, const PseudoOrbit& pseudo) {
  std::vector<Point> y;
  y.reserve(static_cast<std::size_t>(pseudo.total_length()) + 1);
  for (std::size_t i = 0; i < pseudo.segments.size(); ++i) {
    const auto t = pseudo.segments[i].trajectory(system);
    y.insert(y.end(), t.begin(), t.end() - 1);
    if (!pseudo.period && i + 1 == pseudo.segments.size()) y.push_back(t.back());
  }
  return y;
}

// Boundary normals for a free window: delta_0 orthogonal to E^s(y_0) and
// delta_N inside E^s(y_N). E^s comes from one backward sweep over the seed
// extended 30 steps past y_N, so only forward iterates are needed.
std::pair<Vec2, Vec2> boundary_normals(const MapSystem& system, const std::vector<Point>& y) {
  constexpr int extension = 30;
  std::vector<Point> path = y;
  for (int k = 0; k < extension; ++k) {
    path.push_back(system.forward(path.back()));
    if (system.escaped(path.back()))
      throw Error(ErrorCode::orbit_escape, "boundary sweep escaped", static_cast<long>(path.size() - 1));
  }
  Vec2 v = Vec2(0.7313537016191705, 0.6819983600624985).normalized();
  Vec2 at_end = v;
  for (std::size_t t = path.size() - 1; t > 0; --t) {
    v = system.jacobian(path[t - 1]).lu().solve(v).normalized();
    if (t - 1 == y.size() - 1) at_end = v;
  }
  return {v, perp(at_end)};
}

void fill_deviations(const MapSystem& system, const PseudoOrbit& pseudo, ShadowResult& out) {
  const long start = pseudo.start_time();
  const std::size_t n = out.orbit.size();
  out.deviations.clear();
  for (int i = pseudo.first_index; i <= pseudo.last_index(); ++i) {
    const Segment& s = pseudo.segment(i);
    const long k0 = pseudo.offset(i) - start;
    const auto t = s.trajectory(system);
    for (int j = 0; j <= s.length; ++j) {
      const std::size_t k = static_cast<std::size_t>(k0 + j) % n;
      out.deviations.push_back({i, j, system.distance(out.orbit[k], t[static_cast<std::size_t>(j)])});
    }
  }
  out.eta = out.max_deviation();
  out.theta = 0.0;
}

}  // namespace

ShadowResult newton_shadow(const MapSystem& system, const PseudoOrbit& pseudo, double tol, int max_iter) {
  if (pseudo.segments.empty()) throw std::invalid_argument("newton_shadow: empty pseudo-orbit");
  if (pseudo.total_length() > 100000) throw std::invalid_argument("newton_shadow: window longer than 1e5");
  if (!(tol > 0.0) || max_iter < 1) throw std::invalid_argument("newton_shadow: need tol > 0, max_iter >= 1");

  ShadowResult out;
  out.periodic = pseudo.period.has_value();
  std::vector<Point> y = seed_orbit(system, pseudo);
  const NewtonSystem sys(y.size(), out.periodic);
  Vec2 start_normal = Vec2::UnitX();
  Vec2 end_normal = Vec2::UnitY();
  if (!out.periodic) std::tie(start_normal, end_normal) = boundary_normals(system, y);

  Residual r = residual_of(system, y, out.periodic);
  while (r.max >= tol) {
    if (out.newton_iterations >= max_iter) {
      out.status = SolveStatus::newton_diverged;
      out.message = "iteration limit reached";
      break;
    }
    std::vector<Vec2> delta;
    try {
      delta = sys.solve(system, y, r, start_normal, end_normal, out.smallest_pivot);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ill_conditioned) throw;
      out.status = SolveStatus::ill_conditioned;
      out.message = e.what();
      break;
    }
    double step = 0.0;
    for (const auto& d : delta) step = std::max(step, d.norm());
    if (!(step <= 0.25)) {
      out.status = SolveStatus::newton_diverged;
      out.message = "Newton step exceeds 0.25";
      break;
    }
    double alpha = 1.0;
    bool accepted = false;
    std::vector<Point> trial(y.size());
    for (int halving = 0; halving <= 30; ++halving) {
      for (std::size_t j = 0; j < y.size(); ++j) trial[j] = system.wrap(Point(y[j] + alpha * delta[j]));
      Residual rt = residual_of(system, trial, out.periodic);
      if (rt.max < r.max) {
        y.swap(trial);
        r = std::move(rt);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++out.newton_iterations;
    if (!accepted) {
      out.status = SolveStatus::newton_diverged;
      out.message = "damping failed to reduce the residual";
      break;
    }
  }
  out.orbit = std::move(y);
  out.orbit_residual = r.max;
  fill_deviations(system, pseudo, out);
  return out;
}

ShadowCheck verify_exponential_shadowing(const PseudoOrbit& pseudo, const ShadowResult& result, double eta,
                                         double theta) {
  ShadowCheck c;
  c.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& d : result.deviations) {
    const int n = pseudo.segment(d.segment).length;
    const double m = eta * std::exp(-std::min(d.step, n - d.step) * theta) - d.value;
    c.margins.push_back(m);
    c.worst_margin = std::min(c.worst_margin, m);
  }
  c.pass = !c.margins.empty() && c.worst_margin > 0.0;
  return c;
}

std::vector<double> floquet_log_moduli(const MapSystem& system, const Point& z, int n) {
  if (n < 1) throw std::invalid_argument("floquet_log_moduli: n must be >= 1");
  // Df^n(z) = exp(log_scale) m_hat; the small modulus comes from log|det|.
  Mat2 m_hat = Mat2::Identity();
  double log_scale = 0.0;
  double log_det = 0.0;
  Point p = system.wrap(z);
  for (int k = 0; k < n; ++k) {
    const Mat2 j = system.jacobian(p);
    log_det += std::log(std::abs(j.determinant()));
    m_hat = j * m_hat;
    const double c = m_hat.cwiseAbs().maxCoeff();
    m_hat /= c;
    log_scale += std::log(c);
    p = system.forward(p);
  }
  const double tr = m_hat.trace();
  const double det = m_hat.determinant();
  const double disc = tr * tr - 4.0 * det;
  if (disc < 0.0) return {0.5 * log_det, 0.5 * log_det};
  const double big = 0.5 * (tr + std::copysign(std::sqrt(disc), tr));
  const double log_big = std::log(std::abs(big)) + log_scale;
  std::vector<double> out{log_det - log_big, log_big};
  std::sort(out.begin(), out.end());
  return out;
}

PeriodicPoint close_orbit(const MapSystem& system, const Point& x, int n, double tol, int max_iter) {
  if (n < 1) throw std::invalid_argument("close_orbit: n must be >= 1");
  PseudoOrbit pseudo;
  pseudo.segments.push_back({system.wrap(x), n});
  pseudo.period = 1;
  pseudo.measure_jumps(system);
  pseudo.delta = pseudo.max_jump();
  const ShadowResult r = newton_shadow(system, pseudo, tol, max_iter);

  PeriodicPoint pp;
  pp.period = n;
  pp.status = r.status;
  pp.residual = r.orbit_residual;
  pp.newton_iterations = r.newton_iterations;
  pp.orbit = r.orbit;
  pp.z = r.orbit.front();
  pp.closing_deviations.reserve(static_cast<std::size_t>(n) + 1);
  for (const auto& d : r.deviations) pp.closing_deviations.push_back(d.value);
  if (pp.converged()) {
    pp.floquet_log_moduli = floquet_log_moduli(system, pp.z, n);
    pp.hyperbolicity_margin = std::min(std::abs(pp.floquet_log_moduli[0]), std::abs(pp.floquet_log_moduli[1]));
  }
  return pp;
}

CensusLevel periodic_census(const MapSystem& system, int n, int grid_n, double radius, double tol, Execution exec) {
  if (n < 1 || grid_n < 1) throw std::invalid_argument("periodic_census: n and grid_n must be >= 1");
  const auto box = system.sampling_box();
  const std::size_t seeds = static_cast<std::size_t>(grid_n) * static_cast<std::size_t>(grid_n);
  const auto solved = map_indices<std::vector<Point>>(
      seeds,
      [&](std::size_t k) -> std::vector<Point> {
        const double u = (static_cast<double>(k / static_cast<std::size_t>(grid_n)) + 0.5) / grid_n;
        const double v = (static_cast<double>(k % static_cast<std::size_t>(grid_n)) + 0.5) / grid_n;
        const Point seed(box[0](0) + (box[1](0) - box[0](0)) * u, box[0](1) + (box[1](1) - box[0](1)) * v);
        PseudoOrbit pseudo;
        pseudo.segments.push_back({system.wrap(seed), n});
        pseudo.period = 1;
        try {
          const ShadowResult r = newton_shadow(system, pseudo, tol, 50);
          if (r.converged()) return r.orbit;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::orbit_escape) throw;
        }
        return {};
      },
      exec);

  CensusLevel level;
  level.n = n;
  level.seeds = static_cast<int>(seeds);
  SpatialHash index(system, radius);
  std::vector<std::pair<std::size_t, std::size_t>> picks;  // (seed, orbit position)
  for (std::size_t k = 0; k < seeds; ++k) {
    if (solved[k].empty()) continue;
    ++level.converged_seeds;
    for (std::size_t j = 0; j < solved[k].size(); ++j) {
      const Point& p = solved[k][j];
      if (index.nearest(p, radius) >= 0) continue;
      index.insert(static_cast<int>(picks.size()), p);
      picks.emplace_back(k, j);
    }
  }
  level.points = map_indices<PeriodicPoint>(
      picks.size(),
      [&](std::size_t i) {
        const auto& orbit = solved[picks[i].first];
        const std::size_t j0 = picks[i].second;
        PeriodicPoint pp;
        pp.period = n;
        for (std::size_t j = 0; j < orbit.size(); ++j) pp.orbit.push_back(orbit[(j0 + j) % orbit.size()]);
        pp.z = pp.orbit.front();
        pp.residual = orbit_residual(system, pp.orbit, true);
        pp.floquet_log_moduli = floquet_log_moduli(system, pp.z, n);
        pp.hyperbolicity_margin = std::min(std::abs(pp.floquet_log_moduli[0]), std::abs(pp.floquet_log_moduli[1]));
        return pp;
      },
      exec);
  return level;
}

namespace {

double r_squared(double ss_res, double ss_tot) {
  if (ss_tot <= 0.0) return ss_res <= 1e-300 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

RateFit fit_rates(const std::vector<RateSample>& samples) {
  if (samples.size() < 5) throw Error(ErrorCode::insufficient_data, "fit_rates needs at least 5 samples");
  double sx = 0, sy = 0;
  std::vector<double> ys;
  for (const auto& s : samples) {
    const double y = std::log(std::max(s.deviation, 1e-15));
    ys.push_back(y);
    sx += s.separation;
    sy += y;
  }
  const double n = static_cast<double>(samples.size());
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double dx = samples[i].separation - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::insufficient_data, "fit_rates needs at least two separations");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double e = ys[i] - (intercept + slope * samples[i].separation);
    ss_res += e * e;
  }
  return {-slope, std::exp(intercept), r_squared(ss_res, syy)};
}

LipschitzFit fit_lipschitz(const std::vector<LipschitzSample>& samples) {
  if (samples.size() < 2) throw Error(ErrorCode::insufficient_data, "fit_lipschitz needs at least 2 samples");
  double sdd = 0, sdy = 0, sy = 0;
  for (const auto& s : samples) {
    sdd += s.delta * s.delta;
    sdy += s.delta * s.max_deviation;
    sy += s.max_deviation;
  }
  if (!(sdd > 0.0)) throw Error(ErrorCode::insufficient_data, "fit_lipschitz needs a nonzero delta");
  const double l = sdy / sdd;
  const double my = sy / static_cast<double>(samples.size());
  double ss_res = 0, ss_tot = 0;
  for (const auto& s : samples) {
    ss_res += (s.max_deviation - l * s.delta) * (s.max_deviation - l * s.delta);
    ss_tot += (s.max_deviation - my) * (s.max_deviation - my);
  }
  return {l, r_squared(ss_res, ss_tot)};
}

PseudoOrbit build_recurrent_pseudo_orbit(const MapSystem& system, const Point& x, const BlockTest& block_test,
                                         const RecurrenceOptions& o) {
  if (!(o.delta > 0.0) || o.min_length < 1 || o.max_segments < 1)
    throw std::invalid_argument("build_recurrent_pseudo_orbit: need delta > 0, T >= 1, max_segments >= 1");
  const Point x0 = system.wrap(x);
  if (!block_test(x0)) throw std::invalid_argument("build_recurrent_pseudo_orbit: block test rejects x");

  std::optional<SpatialHash> pool;
  if (!o.pool.empty()) {
    pool.emplace(system, o.delta);
    for (std::size_t i = 0; i < o.pool.size(); ++i) pool->insert(static_cast<int>(i), o.pool[i]);
  }

  PseudoOrbit po;
  po.delta = o.delta;
  if (o.periodic) po.period = o.max_segments;
  Point current = x0;
  for (int i = 0; i < o.max_segments; ++i) {
    const bool last = i + 1 == o.max_segments;
    Point p = current;
    bool accepted_any = false;
    bool found = false;
    for (long t = 1; t <= o.budget && !found; ++t) {
      p = system.forward(p);
      if (system.escaped(p)) throw Error(ErrorCode::orbit_escape, "recurrence search escaped", t);
      if (t < o.min_length || !block_test(p)) continue;
      accepted_any = true;
      Point next = p;
      if (last && o.periodic) {
        if (!(system.distance(p, x0) < o.delta)) continue;
        next = x0;
      } else if (!last && pool) {
        const int id = pool->nearest(p, o.delta);
        if (id < 0) continue;
        next = pool->point(id);
      }
      po.segments.push_back({current, static_cast<int>(t)});
      current = next;
      found = true;
    }
    if (!found) {
      if (accepted_any) throw Error(ErrorCode::pool_exhausted, "no restart point within delta", i);
      throw Error(ErrorCode::no_recurrence, "no accepted return within the budget", i);
    }
  }
  po.measure_jumps(system);
  return po;
}

std::vector<RecurrenceEvent> find_recurrences(const MapSystem& system, const Point& x, long length, int n_min,
                                              int n_max, double beta, int max_events) {
  if (n_min < 1 || n_max < n_min || length < 1)
    throw std::invalid_argument("find_recurrences: need 1 <= n_min <= n_max, length >= 1");
  std::vector<Point> orbit{system.wrap(x)};
  orbit.reserve(static_cast<std::size_t>(length + n_max) + 1);
  for (long t = 0; t < length + n_max; ++t) {
    orbit.push_back(system.forward(orbit.back()));
    if (system.escaped(orbit.back())) throw Error(ErrorCode::orbit_escape, "recurrence orbit escaped", t + 1);
  }
  std::vector<RecurrenceEvent> events;
  for (long t = 0; t < length && static_cast<int>(events.size()) < max_events; ++t) {
    for (int n = n_min; n <= n_max; ++n) {
      const double gap = system.distance(orbit[static_cast<std::size_t>(t)], orbit[static_cast<std::size_t>(t + n)]);
      if (gap < beta) {
        events.push_back({t, n, gap});
        t += n - 1;
        break;
      }
    }
  }
  return events;
}

}  // namespace pesinlab
