#include "pesinlab/livshitz.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "pesinlab/error.hpp"
#include "pesinlab/spatial.hpp"

namespace pesinlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

class Kahan {
 public:
  void add(double v) {
    const double y = v - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace

Observable constant_observable(double c) {
  std::ostringstream name;
  name << std::setprecision(17) << "const:" << c;
  return {c == 0.0 ? "zero" : name.str(), [c](const Point&) { return c; }, HolderConstants{0.0, 1.0}};
}

Observable sin_x1() {
  return {"sin_x1", [](const Point& x) { return std::sin(kTwoPi * x(0)); }, HolderConstants{kTwoPi, 1.0}};
}

Observable centred_x1() {
  return {"centred_x1", [](const Point& x) { return x(0) - 0.5; }, std::nullopt};
}

std::vector<Observable> coboundary_generators() {
  const double r2 = std::sqrt(2.0);
  return {
      {"sin_x1", [](const Point& x) { return std::sin(kTwoPi * x(0)); }, HolderConstants{kTwoPi, 1.0}},
      {"cos_x2", [](const Point& x) { return std::cos(kTwoPi * x(1)); }, HolderConstants{kTwoPi, 1.0}},
      {"sin_sum", [r2](const Point& x) { return std::sin(kTwoPi * (x(0) + x(1))) / r2; }, HolderConstants{kTwoPi, 1.0}},
      {"cos_x1_sin_x2", [](const Point& x) { return std::cos(kTwoPi * x(0)) * std::sin(kTwoPi * x(1)); },
       HolderConstants{kTwoPi, 1.0}},
      {"sin_2x1", [](const Point& x) { return std::sin(2.0 * kTwoPi * x(0)) / 2.0; }, HolderConstants{kTwoPi, 1.0}},
  };
}

Observable coboundary_of(const MapSystem& system, const Observable& g) {
  std::optional<HolderConstants> h;
  if (g.holder) {
    const double lip = std::exp(system.derivative_bound());
    h = HolderConstants{g.holder->C * (std::pow(lip, g.holder->kappa) + 1.0), g.holder->kappa};
  }
  auto eval = [system, gf = g.eval](const Point& x) { return gf(system.forward(x)) - gf(x); };
  return {"cob_" + g.name, std::move(eval), h};
}

std::vector<Observable> builtin_coboundaries(const MapSystem& system) {
  std::vector<Observable> out;
  for (const auto& g : coboundary_generators()) out.push_back(coboundary_of(system, g));
  return out;
}

std::vector<std::string> observable_names() {
  std::vector<std::string> names{"zero", "sin_x1", "centred_x1", "const:<c>"};
  for (const auto& g : coboundary_generators()) names.push_back("cob_" + g.name);
  return names;
}

Observable observable_from_name(const MapSystem& system, const std::string& name) {
  if (name == "zero") return constant_observable(0.0);
  if (name == "centred_x1") return centred_x1();
  if (name.rfind("const:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double c = std::stod(name.substr(6), &used);
      if (used == name.size() - 6) return constant_observable(c);
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::config_invalid, "bad constant observable '" + name + "'");
  }
  const bool cob = name.rfind("cob_", 0) == 0;
  const std::string base = cob ? name.substr(4) : name;
  for (const auto& g : coboundary_generators())
    if (g.name == base) return cob ? coboundary_of(system, g) : g;
  throw Error(ErrorCode::config_invalid, "unknown observable '" + name + "'");
}

double periodic_sum(const MapSystem& system, const Observable& phi, const PeriodicPoint& p) {
  if (!p.converged() || p.period < 1 || !(p.residual < 1e-10))
    throw Error(ErrorCode::insufficient_data, "periodic_sum needs a verified periodic point");
  Kahan sum;
  Point x = system.wrap(p.z);
  for (int i = 0; i < p.period; ++i) {
    sum.add(phi(x));
    x = system.forward(x);
  }
  return sum.value();
}

double ObstructionScan::worst_relative() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, std::abs(e.sum) / e.point.period);
  return w;
}

std::optional<int> ObstructionScan::first_obstruction(double tol) const {
  std::optional<int> first;
  for (const auto& e : entries)
    if (std::abs(e.sum) > tol * e.point.period && (!first || e.point.period < *first)) first = e.point.period;
  return first;
}

std::vector<CensusLevel> census_up_to(const MapSystem& system, int max_period, int grid_n, Execution exec) {
  if (max_period < 1) throw std::invalid_argument("census_up_to: max_period must be >= 1");
  std::vector<CensusLevel> levels;
  for (int n = 1; n <= max_period; ++n) levels.push_back(periodic_census(system, n, grid_n, 1e-6, 1e-12, exec));
  return levels;
}

namespace {

int minimal_period(const MapSystem& system, const PeriodicPoint& p) {
  for (int d = 1; d < p.period; ++d)
    if (p.period % d == 0 && system.distance(p.orbit.at(static_cast<std::size_t>(d)), p.z) < 1e-8) return d;
  return p.period;
}

}  // namespace

ObstructionScan obstruction_scan(const MapSystem& system, const Observable& phi,
                                 const std::vector<CensusLevel>& census) {
  ObstructionScan scan;
  SpatialHash seen(system, 1e-6);
  int next_id = 0;
  for (const auto& level : census) {
    scan.max_period = std::max(scan.max_period, level.n);
    for (const auto& p : level.points) {
      if (!p.converged() || minimal_period(system, p) != level.n) continue;
      if (seen.nearest(p.z, 1e-6) >= 0) continue;
      for (const auto& q : p.orbit) seen.insert(next_id++, q);
      scan.entries.push_back({p, periodic_sum(system, phi, p)});
    }
  }
  return scan;
}

ObstructionScan obstruction_scan(const MapSystem& system, const Observable& phi, int max_period, int grid_n,
                                 Execution exec) {
  if (max_period < 1) throw std::invalid_argument("obstruction_scan: max_period must be >= 1");
  std::vector<CensusLevel> levels;
  std::string failure;
  for (int n = 1; n <= max_period; ++n) {
    try {
      levels.push_back(periodic_census(system, n, grid_n, 1e-6, 1e-12, exec));
    } catch (const Error& e) {
      failure = e.what();
      break;
    }
  }
  ObstructionScan scan = obstruction_scan(system, phi, levels);
  scan.max_period = max_period;
  scan.complete = failure.empty();
  scan.failure = failure;
  return scan;
}

TransferTable reconstruct_transfer(const MapSystem& system, const Observable& phi, const Point& x, long N) {
  if (N < 1) throw std::invalid_argument("reconstruct_transfer: N must be >= 1");
  TransferTable t;
  t.base = system.wrap(x);
  t.observable = phi.name;
  t.samples.reserve(static_cast<std::size_t>(N) + 1);
  Point p = t.base;
  Kahan psi;
  t.samples.push_back({0, p, 0.0});
  for (long n = 1; n <= N; ++n) {
    psi.add(phi(p));
    p = system.forward(p);
    if (system.escaped(p)) throw Error(ErrorCode::orbit_escape, "transfer orbit escaped", n);
    t.samples.push_back({n, p, psi.value()});
  }
  return t;
}

std::vector<std::optional<double>> near_return_profile(const MapSystem& system, const TransferTable& table,
                                                       const std::vector<double>& radii, Execution exec) {
  if (table.samples.empty()) throw std::invalid_argument("near_return_profile: empty table");
  if (radii.empty()) return {};
  for (double r : radii)
    if (!(r > 0.0)) throw std::invalid_argument("near_return_profile: radii must be positive");
  const double r_max = *std::max_element(radii.begin(), radii.end());
  SpatialHash index(system, r_max);
  const auto& s = table.samples;
  for (std::size_t i = 0; i < s.size(); ++i) index.insert(static_cast<int>(i), s[i].point);
  const std::size_t R = radii.size();
  const auto per_sample = map_indices<std::vector<double>>(
      s.size(),
      [&](std::size_t i) {
        std::vector<double> best(R, -1.0);
        index.for_each_near(s[i].point, r_max, [&](int id) {
          const auto j = static_cast<std::size_t>(id);
          if (j <= i) return;
          const double d = system.distance(s[i].point, s[j].point);
          const double gap = std::abs(s[i].psi - s[j].psi);
          for (std::size_t k = 0; k < R; ++k)
            if (d < radii[k]) best[k] = std::max(best[k], gap);
        });
        return best;
      },
      exec);
  std::vector<double> best(R, -1.0);
  for (const auto& v : per_sample)
    for (std::size_t k = 0; k < R; ++k) best[k] = std::max(best[k], v[k]);
  std::vector<std::optional<double>> out;
  for (double b : best) out.push_back(b < 0.0 ? std::nullopt : std::optional<double>(b));
  return out;
}

double coboundary_residual(const MapSystem& system, const TransferTable& table, double radius, Execution exec) {
  const auto r = near_return_profile(system, table, {radius}, exec);
  if (!r[0]) throw Error(ErrorCode::no_pairs, "no near-returns within the radius; increase N");
  return *r[0];
}

HolderFit fit_holder(const std::vector<std::pair<double, double>>& radius_discrepancy) {
  if (radius_discrepancy.size() < 3) throw Error(ErrorCode::insufficient_data, "Holder fit needs >= 3 radii");
  std::vector<std::pair<double, double>> xy;
  for (const auto& [r, d] : radius_discrepancy)
    if (d > 0.0) xy.emplace_back(std::log(r), std::log(d));
  HolderFit fit;
  if (xy.empty()) {
    fit.degenerate = true;
    return fit;
  }
  if (xy.size() < 3) throw Error(ErrorCode::insufficient_data, "Holder fit needs >= 3 nonzero discrepancies");
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
  if (sxx == 0.0) throw Error(ErrorCode::insufficient_data, "Holder fit needs distinct radii");
  fit.kappa_hat = sxy / sxx;
  fit.C_hat = std::exp(my - fit.kappa_hat * mx);
  double ss_res = 0.0;
  for (const auto& [x, y] : xy) {
    const double e = y - (my + fit.kappa_hat * (x - mx));
    ss_res += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

HolderFit holder_estimate(const MapSystem& system, const TransferTable& table, const std::vector<double>& radius_grid,
                          Execution exec) {
  const auto prof = near_return_profile(system, table, radius_grid, exec);
  std::vector<std::pair<double, double>> data;
  for (std::size_t k = 0; k < prof.size(); ++k)
    if (prof[k]) data.emplace_back(radius_grid[k], *prof[k]);
  return fit_holder(data);
}

void write_transfer_csv(std::ostream& out, const TransferTable& table) {
  out << "n,x1,x2,psi\n" << std::setprecision(17);
  for (const auto& s : table.samples) out << s.n << ',' << s.point(0) << ',' << s.point(1) << ',' << s.psi << '\n';
}

}  // namespace pesinlab
