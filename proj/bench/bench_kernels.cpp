// Serial reference against the OpenMP path for each parallel kernel.
// Usage: bench_kernels [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "pesinlab/kernels.hpp"
#include "pesinlab/livshitz.hpp"
#include "pesinlab/manifolds.hpp"
#include "pesinlab/pesin.hpp"

using namespace pesinlab;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* name, const std::function<std::string(Execution)>& kernel) {
  std::string serial, parallel;
  const double ts = seconds([&] { serial = kernel(Execution::serial); });
  const double tp = seconds([&] { parallel = kernel(Execution::parallel); });
  std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", name, ts, tp, ts / tp, serial == parallel ? "same" : "DIFFERENT");
}

std::string str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) set_thread_count(std::atoi(argv[1]));
  std::printf("threads %d\n%-28s %10s %10s %9s\n", thread_count(), "kernel", "serial s", "parallel s", "speedup");

  const auto cat = MapSystem::cat();
  const auto pc = MapSystem::perturbed_cat(0.05);

  row("derivative_log_sup 1024", [&](Execution e) { return str(derivative_log_sup(pc, 1024, e)); });

  row("block measure 2000", [&](Execution e) {
    const auto m = estimate_block_measure(pc, {5, 0.8, 10, 10, 30}, 1, {2000, 1000, 42}, e);
    std::string s;
    for (double f : m.by_k) s += str(f) + ",";
    return s;
  });

  row("census n=6 grid 256", [&](Execution e) {
    const auto level = periodic_census(cat, 6, 256, 1e-6, 1e-12, e);
    std::string s = std::to_string(level.points.size());
    for (const auto& p : level.points) s += "," + str(p.z(0)) + "," + str(p.z(1));
    return s;
  });

  const auto anchor = close_orbit(pc, Point(0, 0), 1);
  const auto pu = grow_manifold(pc, anchor, ManifoldKind::unstable, 20.0, 0.01);
  const auto ps = grow_manifold(pc, anchor, ManifoldKind::stable, 20.0, 0.01);
  row("contraction profile", [&](Execution e) {
    std::string s;
    for (const auto& p : contraction_profile(pc, ps, 30, e)) s += str(p.ratio) + ",";
    return s;
  });
  row("intersections (bucketed)", [&](Execution e) {
    const auto r = find_transverse_intersections(pc, pu, ps, 0.1, -1.0, e);
    std::string s;
    for (const auto& c : r.transverse) s += str(c.point(0)) + "," + str(c.point(1)) + ";";
    return s;
  });
  {
    std::string brute, fast;
    const double tb = seconds([&] {
      for (const auto& c : find_transverse_intersections_brute(pc, pu, ps).transverse)
        brute += str(c.point(0)) + "," + str(c.point(1)) + ";";
    });
    const double tf = seconds([&] {
      for (const auto& c : find_transverse_intersections(pc, pu, ps).transverse)
        fast += str(c.point(0)) + "," + str(c.point(1)) + ";";
    });
    std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", "intersections brute/bucket", tb, tf, tb / tf,
                brute == fast ? "same" : "DIFFERENT");
  }

  const auto table = reconstruct_transfer(cat, coboundary_of(cat, sin_x1()), Point(0.1234567, 0.7654321), 100000);
  row("near returns N=1e5", [&](Execution e) {
    std::string s;
    for (const auto& r : near_return_profile(cat, table, {2.5e-4, 5e-4, 1e-3, 2e-3}, e)) s += str(r.value_or(-1)) + ",";
    return s;
  });
  return 0;
}
