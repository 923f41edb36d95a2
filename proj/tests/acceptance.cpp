// One PASS/FAIL line per acceptance criterion. argv[1] is the pesinlab
// binary, used for the determinism criterion.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "pesinlab/cocycle.hpp"
#include "pesinlab/livshitz.hpp"
#include "pesinlab/manifolds.hpp"
#include "pesinlab/pesin.hpp"
#include "pesinlab/runner.hpp"
#include "pesinlab/shadowing.hpp"

using namespace pesinlab;
namespace fs = std::filesystem;

namespace {

const double kLogLambda = std::log((3.0 + std::sqrt(5.0)) / 2.0);
const Point kBase(0.1234567, 0.7654321);

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<CensusLevel>& cat_census() {
  static const auto levels = census_up_to(MapSystem::cat(), 8, 512);
  return levels;
}

void spectrum(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = finite_time_exponents(MapSystem::cat(), kBase, 100);
  const double dt = seconds_since(t0);
  const double err = std::max(std::abs(s.exponents[0] + kLogLambda), std::abs(s.exponents[1] - kLogLambda));
  o.detail << "exponents " << s.exponents[0] << ", " << s.exponents[1] << "; err " << err << "; " << dt << " s";
  o.require(err <= 1e-9, "exponents within 1e-9");
  o.require(dt < 0.1, "runtime < 0.1 s");
}

void domination(Outcome& o) {
  const auto cat = MapSystem::cat();
  Basis es(2, 1), eu(2, 1);
  es.col(0) = Vec2(-(std::sqrt(5.0) - 1.0) / 2.0, 1.0).normalized();
  eu.col(0) = Vec2(1.0, (std::sqrt(5.0) - 1.0) / 2.0).normalized();
  const double m = domination_margin(cat, kBase, es, eu, 1, 50);
  const double swapped = domination_margin(cat, kBase, eu, es, 1, 50);
  o.detail << "margin " << m << " (2 log lambda = " << 2 * kLogLambda << "); swapped " << swapped;
  o.require(std::abs(m - 2 * kLogLambda) <= 1e-9, "margin = 2 log lambda within 1e-9");
  o.require(std::abs(swapped + m) <= 1e-9, "swapped bundles negate");
}

void pesin_blocks(Outcome& o) {
  const auto cat = MapSystem::cat();
  const PesinParams p{1, 0.9, 10, 20, 30};
  const auto v = classify_block(cat, kBase, p);
  o.require(v.k && *v.k == 1, "cat classifies at k=1");
  const double ea = std::abs(v.margins.a - (kLogLambda - 0.9)), eb = std::abs(v.margins.b - (kLogLambda - 0.9));
  const double ec = std::abs(v.margins.c - (2 * kLogLambda - 1.8));
  o.detail << "margins " << v.margins.a << ", " << v.margins.b << ", " << v.margins.c;
  o.require(std::max({ea, eb, ec}) <= 1e-6, "margins within 1e-6");
  const auto m = estimate_block_measure(cat, p, 1, {1000, 1000, 1});
  o.detail << "; cat measure " << m.fraction;
  o.require(m.fraction == 1.0, "cat block measure 1.0");
  const auto pm = estimate_block_measure(MapSystem::perturbed_cat(0.05), {5, 0.8, 10, 10, 30}, 1, {1000, 1000, 42});
  bool nested = true;
  for (std::size_t k = 1; k < pm.by_k.size(); ++k) nested = nested && pm.by_k[k] >= pm.by_k[k - 1];
  o.detail << "; perturbed by_k " << pm.by_k.front() << " .. " << pm.by_k.back();
  o.require(nested && pm.by_k.size() == 10, "perturbed fractions non-decreasing for k = 1..10");
}

void shadowing(Outcome& o) {
  const auto cat = MapSystem::cat();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int worst_iter = 0, best_iter = 100;
  for (int trial = 0; trial < 10; ++trial) {
    PseudoOrbit po;
    Point p(u(rng), u(rng));
    const double delta = std::pow(10.0, -3.0 - trial % 4);
    for (int i = 0; i < 8; ++i) {
      Segment seg{p, 10 + i};
      seg.points = seg.trajectory(cat);
      const double a = 2 * std::numbers::pi * u(rng);
      p = cat.wrap(Point(seg.points.back() + delta * Point(std::cos(a), std::sin(a))));
      po.segments.push_back(std::move(seg));
    }
    po.measure_jumps(cat);
    const auto r = newton_shadow(cat, po, 1e-12, 20);
    o.require(r.converged(), "random pseudo-orbit converged");
    worst_iter = std::max(worst_iter, r.newton_iterations);
    best_iter = std::min(best_iter, r.newton_iterations);
  }
  o.detail << "Newton iterations " << best_iter << ".." << worst_iter;
  o.require(worst_iter == 1 && best_iter == 1, "exactly one Newton iteration");
  double worst_dev = 0.0;
  std::vector<LipschitzSample> fit;
  for (double delta : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const auto oracle = oracle::single_jump_oracle(delta);
    const auto r = newton_shadow(cat, oracle::single_jump(cat, delta), 1e-13, 20);
    if (!r.converged() || r.deviations.size() != oracle.deviations.size()) {
      o.require(false, "single-jump solve");
      return;
    }
    for (std::size_t j = 0; j < oracle.deviations.size(); ++j)
      worst_dev = std::max(worst_dev, std::abs(r.deviations[j].value - oracle.deviations[j]));
    fit.push_back({delta, r.max_deviation()});
  }
  const auto lf = fit_lipschitz(fit);
  const double L = oracle::single_jump_oracle(1.0).max_deviation;
  o.detail << "; oracle deviation err " << worst_dev << "; L_hat " << lf.L_hat << " vs " << L << ", r2 " << lf.r2;
  o.require(worst_dev <= 1e-10, "deviations match oracle within 1e-10");
  o.require(std::abs(lf.L_hat - L) <= 0.2 * L && lf.r2 > 0.999, "Lipschitz fit");
}

void exponential_bound(Outcome& o) {
  const auto cat = MapSystem::cat();
  const double L = oracle::single_jump_oracle(1.0).max_deviation;
  double worst = std::numeric_limits<double>::infinity();
  for (double delta : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const auto po = oracle::single_jump(cat, delta);
    const auto r = newton_shadow(cat, po, 1e-13, 20);
    const auto v = verify_exponential_shadowing(po, r, 2 * L * delta, 0.9 * kLogLambda);
    o.require(r.converged() && v.pass, "bound holds");
    worst = std::min(worst, v.worst_margin);
  }
  o.detail << "worst margin " << worst;
  o.require(worst > 0, "worst_margin > 0");
}

void closing(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& levels = cat_census();
  const std::vector<std::size_t> want{1, 5, 16, 45, 121, 320, 841, 2205};
  double worst_floquet = 0.0;
  o.detail << "counts";
  for (int n = 2; n <= 8; ++n) {
    const auto& level = levels[static_cast<std::size_t>(n - 1)];
    o.detail << ' ' << level.points.size();
    o.require(level.points.size() == want[static_cast<std::size_t>(n - 1)], "count at n=" + std::to_string(n));
    for (const auto& p : level.points)
      worst_floquet = std::max({worst_floquet, std::abs(p.floquet_log_moduli[0] + n * kLogLambda),
                                std::abs(p.floquet_log_moduli[1] - n * kLogLambda)});
  }
  const double dt = seconds_since(t0);
  o.detail << "; Floquet err " << worst_floquet << "; " << dt << " s";
  o.require(worst_floquet <= 1e-8, "Floquet within 1e-8");
  o.require(dt < 60.0, "census < 60 s");

  const auto s = MapSystem::perturbed_cat(0.05);
  const Point x(0.123, 0.456);
  const auto events = find_recurrences(s, x, 20000, 20, 200, 0.02, 60);
  std::vector<Point> orbit{x};
  for (int t = 0; t < 20000; ++t) orbit.push_back(s.forward(orbit.back()));
  std::vector<RateSample> samples;
  int closed = 0;
  for (const auto& e : events) {
    const auto p = close_orbit(s, orbit[static_cast<std::size_t>(e.time)], e.n);
    if (!p.converged()) continue;
    ++closed;
    for (int j = 0; j <= e.n; ++j)
      if (p.closing_deviations[static_cast<std::size_t>(j)] > 1e-12)
        samples.push_back({std::min(j, e.n - j), p.closing_deviations[static_cast<std::size_t>(j)]});
  }
  const auto f = fit_rates(samples);
  o.detail << "; perturbed closings " << closed << ", theta_hat " << f.theta_hat << ", r2 " << f.r2;
  o.require(closed >= 50, ">= 50 closings");
  o.require(f.theta_hat >= 0.5 && f.r2 >= 0.9, "rate fit");
}

void contraction(Outcome& o) {
  const auto cat = MapSystem::cat();
  const auto ps = grow_manifold(cat, close_orbit(cat, Point(0, 0), 1), ManifoldKind::stable, 0.5, 0.05);
  double worst = 0.0;
  for (const auto& p : contraction_profile(cat, ps, 40)) worst = std::max(worst, std::abs(p.ratio - std::exp(-kLogLambda * p.n)));
  o.detail << "cat ratio err " << worst;
  o.require(worst <= 1e-9, "cat ratio lambda^-n within 1e-9");
  const auto s = MapSystem::perturbed_cat(0.05);
  const auto qs = grow_manifold(s, close_orbit(s, Point(0, 0), 1), ManifoldKind::stable, 0.3, 0.01);
  const auto fit = fit_contraction(contraction_profile(s, qs, 30));
  const double worst_res = *std::max_element(fit.residuals.begin(), fit.residuals.end());
  o.detail << "; perturbed C_bar " << fit.C_bar << ", zeta_bar " << fit.zeta_bar << ", max residual " << worst_res;
  o.require(fit.zeta_bar >= 0.8 && worst_res <= 1e-12, "perturbed bound covers every n");
}

void homoclinic(Outcome& o) {
  const auto cat = MapSystem::cat();
  const auto anchor = close_orbit(cat, Point(0, 0), 1);
  const auto pu = grow_manifold(cat, anchor, ManifoldKind::unstable, 3.0, 0.05);
  const auto ps = grow_manifold(cat, anchor, ManifoldKind::stable, 3.0, 0.05);
  const auto rep = find_transverse_intersections(cat, pu, ps);
  int count = 0;
  double worst = 0.0;
  for (const auto& c : rep.transverse) {
    if (c.at_anchor) continue;
    ++count;
    worst = std::max(worst, std::abs(c.angle - std::numbers::pi / 2));
  }
  o.detail << count << " homoclinic crossings, angle err " << worst;
  o.require(count > 0 && worst <= 1e-6, "transverse at pi/2 within 1e-6");
  const double cov = closure_coverage(cat, grow_manifold(cat, anchor, ManifoldKind::unstable, 1000.0, 0.05), 64);
  o.detail << "; coverage " << cov;
  o.require(cov >= 0.99, "coverage >= 0.99");
}

void livshitz(Outcome& o) {
  const auto cat = MapSystem::cat();
  const auto gens = coboundary_generators();
  double worst_scan = 0.0, worst_res = 0.0, worst_tel = 0.0;
  for (const auto& g : gens) {
    const auto phi = coboundary_of(cat, g);
    const auto scan = obstruction_scan(cat, phi, cat_census());
    o.require(scan.complete && scan.max_period == 8, "scan to period 8");
    worst_scan = std::max(worst_scan, scan.worst_relative());
    const auto t = reconstruct_transfer(cat, phi, kBase, 100000);
    worst_res = std::max(worst_res, coboundary_residual(cat, t, 1e-3));
    for (const auto& s : t.samples) worst_tel = std::max(worst_tel, std::abs(s.psi - (g(s.point) - g(t.base))));
  }
  o.detail << "coboundary sums/period " << worst_scan << ", residual " << worst_res << ", telescoping err " << worst_tel;
  o.require(worst_scan <= 1e-9, "sums vanish within 1e-9 period");
  o.require(worst_res <= 2 * std::numbers::pi * 1e-3, "residual <= 2 pi 1e-3");
  o.require(worst_tel <= 1e-11, "psi matches g(f^n x) - g(x)");
  const auto scan = obstruction_scan(cat, sin_x1(), cat_census());
  const auto first = scan.first_obstruction();
  o.detail << "; sin_x1 first obstruction at period " << (first ? *first : -1);
  o.require(first && *first <= 4, "obstruction by period 4");
  const auto t = reconstruct_transfer(cat, sin_x1(), kBase, 100000);
  const double floor = 400.0;  // recorded baseline
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& r : near_return_profile(cat, t, {1e-3, 5e-4, 2.5e-4, 1.25e-4})) lowest = std::min(lowest, r.value_or(0.0));
  o.detail << ", residual floor " << lowest;
  o.require(lowest >= floor, "floor stays above baseline as radius halves");
}

int run_cli(const std::string& cli, const fs::path& config, const fs::path& out, int threads) {
  const std::string cmd = "\"" + cli + "\" run --config \"" + config.string() + "\" --out \"" + out.string() +
                          "\" --threads " + std::to_string(threads) + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(Outcome& o, const std::string& cli) {
  const std::vector<Json> configs = {
      {{"system", "cat"}, {"experiment", "lyapunov"}, {"n", 200}, {"samples", 4}, {"seed", 5}},
      {{"system", "perturbed_cat"}, {"experiment", "pesin-block"}, {"K", 2}, {"zeta", 0.7}, {"k", 2}, {"horizon", 10}, {"samples", 200}, {"seed", 9}},
      {{"system", "perturbed_cat"}, {"experiment", "shadow"}, {"delta", 1e-4}, {"segments", 6}, {"seed", 4}},
      {{"system", "perturbed_cat"}, {"experiment", "close"}, {"T", 5000}, {"events", 20}, {"seed", 11}},
      {{"system", "cat"}, {"experiment", "census"}, {"max_period", 4}, {"grid_n", 128}},
      {{"system", "perturbed_cat"}, {"experiment", "manifolds"}, {"length", 2.0}},
      {{"system", "cat"}, {"experiment", "coverage"}, {"length", 100.0}, {"grid_n", 32}},
      {{"system", "cat"}, {"experiment", "livshitz"}, {"observable", "cob_cos_x2"}, {"N", 20000}, {"radius", 3e-3},
       {"max_period", 3}, {"grid_n", 64}, {"seed", 2}},
  };
  const fs::path root = fs::temp_directory_path() / "pesinlab_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  int files = 0;
  for (const auto& doc : configs) {
    const std::string name = doc["experiment"].get<std::string>();
    const fs::path cfg = root / (name + ".json");
    std::ofstream(cfg) << doc.dump();
    const int a = run_cli(cli, cfg, root / "t1a", 1);
    const int b = run_cli(cli, cfg, root / "t1b", 1);
    const int c = run_cli(cli, cfg, root / "t8", 8);
    o.require(a == b && b == c && (a == 0 || a == 2), name + " exit codes " + std::to_string(a) + "/" +
                                                          std::to_string(b) + "/" + std::to_string(c));
  }
  for (const auto& e : fs::directory_iterator(root / "t1a")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    const auto body = slurp(e.path());
    const auto name = e.path().filename();
    o.require(body == slurp(root / "t1b" / name), name.string() + " rerun differs");
    o.require(body == slurp(root / "t8" / name), name.string() + " 8-thread run differs");
  }
  o.detail << files << " CSV files from 8 experiments identical across reruns and 1/8 threads";
  o.require(files >= 8, "every experiment wrote CSV");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path to pesinlab>\n");
    return 1;
  }
  const std::string cli = argv[1];
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"cat spectrum", spectrum},
      {"domination margin", domination},
      {"Pesin classification", pesin_blocks},
      {"shadowing correctness", shadowing},
      {"exponential shadowing bound", exponential_bound},
      {"closing and census", closing},
      {"manifold contraction", contraction},
      {"homoclinic and coverage", homoclinic},
      {"Livshitz", livshitz},
      {"determinism", [&](Outcome& o) { determinism(o, cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu %s: %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
