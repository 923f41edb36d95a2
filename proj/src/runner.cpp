#include "pesinlab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <locale>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>

#include "pesinlab/cocycle.hpp"
#include "pesinlab/error.hpp"
#include "pesinlab/kernels.hpp"
#include "pesinlab/livshitz.hpp"
#include "pesinlab/manifolds.hpp"
#include "pesinlab/pesin.hpp"
#include "pesinlab/pseudo_orbit.hpp"
#include "pesinlab/shadowing.hpp"
#include "pesinlab/spatial.hpp"

namespace fs = std::filesystem;

namespace pesinlab {

namespace {

using K = ParamKind;

ParamSpec req(std::string key, ParamKind kind, std::optional<double> min, std::string doc) {
  return {std::move(key), kind, true, nullptr, min, std::move(doc)};
}
ParamSpec opt(std::string key, ParamKind kind, Json fallback, std::optional<double> min, std::string doc) {
  return {std::move(key), kind, false, std::move(fallback), min, std::move(doc)};
}

const std::map<std::string, std::vector<ParamSpec>>& schemas() {
  static const std::map<std::string, std::vector<ParamSpec>> s = {
      {"lyapunov",
       {req("n", K::integer, 1, "horizon"),
        opt("x", K::point, nullptr, {}, "start point; otherwise seeded draws"),
        opt("samples", K::integer, 1, 1, "seeded start points when x is absent"),
        opt("burn_in", K::integer, 0, 0, "iterations before measuring"),
        opt("gap", K::real, 0.05, 0, "exponent clustering gap"),
        opt("expect", K::real_list, nullptr, {}, "expected exponents, ascending"),
        opt("tolerance", K::real, 1e-6, 0, "tolerance for expect")}},
      {"pesin-block",
       {req("K", K::integer, 1, "block length"),
        req("zeta", K::real, 0, "rate"),
        req("k", K::integer, 1, "block level"),
        opt("k_max", K::integer, 10, 1, "largest level"),
        opt("horizon", K::integer, 20, 1, "largest l tested"),
        opt("sweep", K::integer, 30, 1, "bundle sweep length"),
        opt("samples", K::integer, 1000, 1, "sample count"),
        opt("burn_in", K::integer, 1000, 0, "iterations before sampling"),
        opt("min_fraction", K::real, nullptr, 0, "required fraction at level k")}},
      {"shadow",
       {req("delta", K::real, 0, "jump size"),
        opt("T", K::integer, 20, 1, "segment length"),
        opt("segments", K::integer, 10, 1, "segment count"),
        opt("x", K::point, nullptr, {}, "start point; otherwise seeded"),
        opt("tol", K::real, 1e-12, 0, "Newton tolerance"),
        opt("max_iter", K::integer, 50, 1, "Newton iteration cap"),
        opt("eta", K::real, nullptr, 0, "shadowing bound prefactor"),
        opt("theta", K::real, 0.0, 0, "shadowing bound rate")}},
      {"close",
       {opt("T", K::integer, 20000, 1, "orbit length searched for recurrences"),
        opt("n_min", K::integer, 20, 1, "shortest return"),
        opt("n_max", K::integer, 200, 1, "longest return"),
        opt("beta", K::real, 0.02, 0, "recurrence radius"),
        opt("events", K::integer, 60, 1, "recurrences closed"),
        opt("x", K::point, nullptr, {}, "start point; otherwise seeded"),
        opt("tol", K::real, 1e-12, 0, "Newton tolerance"),
        opt("min_closed", K::integer, 1, 0, "required converged closings"),
        opt("min_theta", K::real, nullptr, {}, "required fitted rate"),
        opt("min_r2", K::real, nullptr, {}, "required fit quality")}},
      {"census",
       {req("max_period", K::integer, 1, "largest period"),
        opt("grid_n", K::integer, 512, 1, "seed grid per axis"),
        opt("radius", K::real, 1e-6, 0, "merge radius"),
        opt("tol", K::real, 1e-12, 0, "Newton tolerance")}},
      {"manifolds",
       {opt("x", K::point, Json::array({0.0, 0.0}), {}, "anchor seed"),
        opt("period", K::integer, 1, 1, "anchor period"),
        opt("length", K::real, 1.0, 0, "target arc length per branch"),
        opt("h", K::real, 0.01, 0, "largest segment"),
        opt("n_max", K::integer, 30, 0, "contraction profile horizon"),
        opt("min_angle", K::real, 0.1, 0, "transversality threshold"),
        opt("tol", K::real, 1e-12, 0, "Newton tolerance"),
        opt("min_zeta", K::real, nullptr, {}, "required fitted contraction rate")}},
      {"coverage",
       {opt("x", K::point, Json::array({0.0, 0.0}), {}, "anchor seed"),
        opt("period", K::integer, 1, 1, "anchor period"),
        opt("length", K::real, 1000.0, 0, "longest patch"),
        opt("length_min", K::real, 10.0, 0, "shortest patch; lengths double up to length"),
        opt("h", K::real, 0.05, 0, "largest segment"),
        opt("grid_n", K::integer, 64, 1, "cells per axis"),
        opt("box", K::real_list, nullptr, {}, "x0,y0,x1,y1; required on the plane"),
        opt("tol", K::real, 1e-12, 0, "Newton tolerance"),
        opt("min_coverage", K::real, nullptr, 0, "required coverage at full length")}},
      {"livshitz",
       {opt("observable", K::text, "cob_sin_x1", {}, "observable name"),
        opt("N", K::integer, 100000, 1, "orbit length"),
        opt("x", K::point, nullptr, {}, "base point; otherwise seeded"),
        opt("radius", K::real, 1e-3, 0, "near-return radius"),
        opt("radius_grid", K::real_list, Json::array({2.5e-4, 5e-4, 1e-3, 2e-3, 4e-3}), 0, "radii for the Holder fit"),
        opt("max_period", K::integer, 4, 1, "obstruction scan depth"),
        opt("grid_n", K::integer, 128, 1, "census seed grid"),
        opt("expect", K::text, "coboundary", {}, "coboundary or obstructed")}},
  };
  return s;
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::config_invalid, what); }

void check_number(const std::string& key, double v, const ParamSpec& spec) {
  if (!std::isfinite(v)) invalid("'" + key + "' must be finite");
  if (spec.min && v < *spec.min) {
    std::ostringstream m;
    m << "'" << key << "' must be >= " << *spec.min;
    invalid(m.str());
  }
}

Json check_value(const ParamSpec& spec, const Json& v) {
  const auto& key = spec.key;
  switch (spec.kind) {
    case K::integer:
      if (!v.is_number_integer()) invalid("'" + key + "' must be an integer");
      check_number(key, v.get<double>(), spec);
      return v;
    case K::real:
      if (!v.is_number()) invalid("'" + key + "' must be a number");
      check_number(key, v.get<double>(), spec);
      return Json(v.get<double>());
    case K::real_list:
    case K::point: {
      if (!v.is_array()) invalid("'" + key + "' must be an array of numbers");
      if (spec.kind == K::point && v.size() != 2) invalid("'" + key + "' must have two entries");
      Json out = Json::array();
      for (const auto& e : v) {
        if (!e.is_number()) invalid("'" + key + "' must be an array of numbers");
        check_number(key, e.get<double>(), spec);
        out.push_back(e.get<double>());
      }
      return out;
    }
    case K::text:
      if (!v.is_string()) invalid("'" + key + "' must be a string");
      return v;
  }
  return v;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
  return s;
}

void cross_checks(const ExperimentConfig& c, const MapSystem& sys) {
  if (c.experiment == "pesin-block") {
    PesinParams p{static_cast<int>(c.integer("K")), c.real("zeta"), static_cast<int>(c.integer("k_max")),
                  static_cast<int>(c.integer("horizon")), static_cast<int>(c.integer("sweep"))};
    try {
      p.validate();
    } catch (const std::exception& e) {
      invalid(e.what());
    }
    if (c.integer("k") > c.integer("k_max")) invalid("'k' must not exceed 'k_max'");
  } else if (c.experiment == "close") {
    if (c.integer("n_min") > c.integer("n_max")) invalid("'n_min' must not exceed 'n_max'");
  } else if (c.experiment == "coverage") {
    if (c.real("length_min") > c.real("length")) invalid("'length_min' must not exceed 'length'");
    if (c.has("box")) {
      const auto b = c.reals("box");
      if (b.size() != 4 || !(b[2] > b[0]) || !(b[3] > b[1])) invalid("'box' must be x0,y0,x1,y1 with x1>x0, y1>y0");
    } else if (sys.domain() == Domain::plane) {
      invalid("'box' is required for plane systems");
    }
  } else if (c.experiment == "livshitz") {
    observable_from_name(sys, c.text("observable"));
    const auto e = c.text("expect");
    if (e != "coboundary" && e != "obstructed") invalid("'expect' must be coboundary or obstructed");
    if (sys.domain() != Domain::torus) invalid("livshitz needs a torus system");
  }
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"lyapunov", "pesin-block", "shadow",   "close",
                                              "census",   "manifolds",   "coverage", "livshitz"};
  return names;
}

const std::vector<ParamSpec>& experiment_schema(const std::string& experiment) {
  const auto it = schemas().find(experiment);
  if (it == schemas().end()) invalid("unknown experiment '" + experiment + "'; expected one of " + join_names(experiment_names()));
  return it->second;
}

MapSystem ExperimentConfig::make_system() const { return MapSystem::from_name(system, system_params); }

Point ExperimentConfig::point(const std::string& key) const {
  const auto v = reals(key);
  return Point(v.at(0), v.at(1));
}

Json ExperimentConfig::echo() const {
  Json j;
  j["system"] = system;
  Json sp = Json::object();
  for (const auto& [k, v] : system_params) sp[k] = v;
  j["system_params"] = sp;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["output"] = output;
  for (const auto& [k, v] : params.items()) j[k] = v;
  return j;
}

ExperimentConfig parse_config(const Json& doc) {
  if (!doc.is_object()) invalid("config must be a JSON object");
  ExperimentConfig c;
  if (!doc.contains("system") || !doc["system"].is_string()) invalid("'system' (string) is required");
  c.system = doc["system"].get<std::string>();
  if (!doc.contains("experiment") || !doc["experiment"].is_string()) invalid("'experiment' (string) is required");
  c.experiment = doc["experiment"].get<std::string>();
  const auto& schema = experiment_schema(c.experiment);
  if (doc.contains("system_params")) {
    if (!doc["system_params"].is_object()) invalid("'system_params' must be an object");
    for (const auto& [k, v] : doc["system_params"].items()) {
      if (!v.is_number()) invalid("system parameter '" + k + "' must be a number");
      c.system_params[k] = v.get<double>();
    }
  }
  if (doc.contains("seed")) {
    const auto& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      invalid("'seed' must be a non-negative 64-bit integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.output = c.experiment;
  if (doc.contains("output")) {
    if (!doc["output"].is_string() || doc["output"].get<std::string>().empty()) invalid("'output' must be a non-empty string");
    c.output = doc["output"].get<std::string>();
  }
  for (const auto& [k, v] : doc.items()) {
    if (k == "system" || k == "experiment" || k == "system_params" || k == "seed" || k == "output") continue;
    if (std::none_of(schema.begin(), schema.end(), [&](const ParamSpec& s) { return s.key == k; }))
      invalid("unknown key '" + k + "' for experiment " + c.experiment);
  }
  for (const auto& spec : schema) {
    if (doc.contains(spec.key)) {
      c.params[spec.key] = check_value(spec, doc[spec.key]);
    } else if (spec.required) {
      invalid("missing required key '" + spec.key + "' for experiment " + c.experiment);
    } else if (!spec.fallback.is_null()) {
      c.params[spec.key] = spec.fallback;
    }
  }
  if (c.experiment == "lyapunov" && c.has("x") && doc.contains("samples"))
    invalid("'x' and 'samples' are mutually exclusive");
  MapSystem sys = MapSystem::cat();
  try {
    sys = c.make_system();
  } catch (const Error& e) {
    invalid(e.what());
  }
  cross_checks(c, sys);
  return c;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) invalid("cannot read config file " + file.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    invalid(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

bool RunReport::passed() const {
  return !error && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

ExitCode RunReport::exit_code() const {
  if (error) return ExitCode::error;
  return passed() ? ExitCode::pass : ExitCode::checks_failed;
}

Json RunReport::to_json() const {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["status"] = error ? "error" : (passed() ? "pass" : "fail");
  j["config"] = config;
  Json cs = Json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}});
  j["checks"] = cs;
  j["scalars"] = scalars;
  j["csv"] = csv_files;
  if (error) {
    j["error"] = {{"name", error->name}, {"message", error->message}, {"index", nullptr}};
    if (error->index) j["error"]["index"] = *error->index;
  } else {
    j["error"] = nullptr;
  }
  j["threads"] = threads;
  j["wall_seconds"] = wall_seconds;
  return j;
}

namespace {

// Written as <path>.partial; only commit() gives it its final name.
class CsvFile {
 public:
  CsvFile(fs::path path, const std::string& header) : path_(std::move(path)), partial_(path_.string() + ".partial") {
    out_.open(partial_);
    if (!out_) throw std::runtime_error("cannot write " + partial_.string());
    out_.imbue(std::locale::classic());
    out_ << std::setprecision(17) << header << '\n';
  }

  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((out_ << (std::exchange(first, false) ? "" : ",") << v), ...);
    out_ << '\n';
  }

  std::string commit() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + partial_.string());
    fs::rename(partial_, path_);
    return path_.string();
  }

 private:
  fs::path path_;
  fs::path partial_;
  std::ofstream out_;
};

struct Run {
  const ExperimentConfig& cfg;
  MapSystem sys;
  fs::path dir;
  RunReport& report;

  CsvFile csv(const std::string& name, const std::string& header) const {
    return CsvFile(dir / (cfg.output + "_" + name + ".csv"), header);
  }
  void commit(CsvFile& f) { report.csv_files.push_back(f.commit()); }
  void check(std::string name, bool pass, double value, double threshold, std::string detail = {}) {
    report.checks.push_back({std::move(name), pass, value, threshold, std::move(detail)});
  }
  Json& scalar(const std::string& key) { return report.scalars[key]; }

  int i(const std::string& key) const { return static_cast<int>(cfg.integer(key)); }
  double r(const std::string& key) const { return cfg.real(key); }

  /// Uniform draw from the sampling box for task `index`, iterated burn_in
  /// steps; escaping plane draws are redrawn from the same stream.
  Point seeded_point(std::uint64_t index, int burn_in) const {
    std::mt19937_64 rng(task_seed(cfg.seed, index));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto box = sys.sampling_box();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Point p(box[0](0) + (box[1](0) - box[0](0)) * u(rng), box[0](1) + (box[1](1) - box[0](1)) * u(rng));
      p = sys.wrap(p);
      bool ok = true;
      for (int t = 0; t < burn_in && ok; ++t) {
        p = sys.forward(p);
        ok = !sys.escaped(p);
      }
      if (ok) return p;
    }
    throw Error(ErrorCode::orbit_escape, "no seeded point survived the burn-in", static_cast<long>(index));
  }
  Point start_point(int burn_in) const {
    return cfg.has("x") ? sys.wrap(cfg.point("x")) : seeded_point(0, sys.domain() == Domain::plane ? burn_in : 0);
  }
};

Json point_json(const Point& p) { return Json::array({p(0), p(1)}); }

void run_lyapunov(Run& run) {
  const int n = run.i("n");
  std::vector<Point> starts;
  if (run.cfg.has("x")) {
    starts.push_back(run.sys.wrap(run.cfg.point("x")));
  } else {
    for (int s = 0; s < run.i("samples"); ++s) starts.push_back(run.seeded_point(static_cast<std::uint64_t>(s), run.i("burn_in")));
  }
  if (run.cfg.has("x"))
    for (int t = 0; t < run.i("burn_in"); ++t) starts[0] = run.sys.forward(starts[0]);
  struct Out {
    LyapunovSpectrum spec;
    double log_det = 0.0;
  };
  const auto res = map_indices<Out>(starts.size(), [&](std::size_t s) {
    Out o{finite_time_exponents(run.sys, starts[s], n, run.r("gap")), 0.0};
    o.log_det = cocycle_product(run.sys, starts[s], n).log_abs_det() / n;
    return o;
  });
  auto f = run.csv("lyapunov", "sample,x1,x2,lambda_1,lambda_2");
  std::vector<double> mean(2, 0.0);
  double worst_sum = 0.0;
  for (std::size_t s = 0; s < res.size(); ++s) {
    const auto& e = res[s].spec.exponents;
    f.row(s, starts[s](0), starts[s](1), e[0], e[1]);
    mean[0] += e[0] / static_cast<double>(res.size());
    mean[1] += e[1] / static_cast<double>(res.size());
    worst_sum = std::max(worst_sum, std::abs(e[0] + e[1] - res[s].log_det));
  }
  run.commit(f);
  run.scalar("exponents") = mean;
  run.scalar("multiplicities") = res[0].spec.multiplicities;
  run.scalar("samples") = res.size();
  run.check("sum_matches_log_det", worst_sum <= 1e-9, worst_sum, 1e-9, "|lambda_1 + lambda_2 - log|det Df^n| / n|");
  if (run.cfg.has("expect")) {
    const auto want = run.cfg.reals("expect");
    double worst = std::numeric_limits<double>::infinity();
    if (want.size() == 2) worst = std::max(std::abs(mean[0] - want[0]), std::abs(mean[1] - want[1]));
    run.check("expected_exponents", worst <= run.r("tolerance"), worst, run.r("tolerance"));
  }
}

void run_pesin(Run& run) {
  PesinParams p{run.i("K"), run.r("zeta"), run.i("k_max"), run.i("horizon"), run.i("sweep")};
  const Sampler sampler{run.i("samples"), run.i("burn_in"), run.cfg.seed};
  const int k = run.i("k");
  const auto m = estimate_block_measure(run.sys, p, k, sampler);
  auto f = run.csv("pesin_block", "k,fraction");
  for (std::size_t j = 0; j < m.by_k.size(); ++j) f.row(j + 1, m.by_k[j]);
  run.commit(f);
  auto g = run.csv("pesin_samples", "sample,level");
  for (std::size_t s = 0; s < m.levels.size(); ++s) g.row(s, m.levels[s] ? *m.levels[s] : -1);
  run.commit(g);
  run.scalar("fraction") = m.fraction;
  run.scalar("by_k") = m.by_k;
  run.scalar("classified") = m.classified;
  run.scalar("escaped") = m.escaped;
  run.scalar("degenerate") = m.degenerate;
  double worst_step = 0.0;
  for (std::size_t j = 1; j < m.by_k.size(); ++j) worst_step = std::min(worst_step, m.by_k[j] - m.by_k[j - 1]);
  run.check("blocks_nested", worst_step >= 0.0, worst_step, 0.0, "min over k of fraction(k+1) - fraction(k)");
  if (run.cfg.has("min_fraction"))
    run.check("min_fraction", m.fraction >= run.r("min_fraction"), m.fraction, run.r("min_fraction"));
}

void run_shadow(Run& run) {
  const double delta = run.r("delta");
  const Point x = run.start_point(1000);
  // x_{i+1} = f^T(x_i) + delta u_i with a seeded unit vector u_i, so every
  // jump is exactly delta and each segment is a true orbit piece.
  PseudoOrbit pseudo;
  const int T = run.i("T");
  const std::uint64_t stream = task_seed(run.cfg.seed, 1);
  Point base = x;
  for (int s = 0; s < run.i("segments"); ++s) {
    if (s > 0) {
      std::mt19937_64 rng(task_seed(stream, static_cast<std::uint64_t>(s)));
      const double a = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
      base = run.sys.wrap(Point(base + delta * Point(std::cos(a), std::sin(a))));
    }
    Segment seg{base, T};
    seg.points = seg.trajectory(run.sys);
    base = seg.points.back();
    pseudo.segments.push_back(std::move(seg));
  }
  pseudo.delta = delta;
  pseudo.measure_jumps(run.sys);
  const auto res = newton_shadow(run.sys, pseudo, run.r("tol"), run.i("max_iter"));
  auto f = run.csv("shadow", "segment,step,deviation");
  for (const auto& d : res.deviations) f.row(d.segment, d.step, d.value);
  run.commit(f);
  auto g = run.csv("shadow_orbit", "t,x1,x2");
  for (std::size_t t = 0; t < res.orbit.size(); ++t) g.row(t, res.orbit[t](0), res.orbit[t](1));
  run.commit(g);
  run.scalar("status") = status_name(res.status);
  run.scalar("message") = res.message;
  run.scalar("newton_iterations") = res.newton_iterations;
  run.scalar("max_jump") = pseudo.max_jump();
  run.scalar("max_deviation") = res.converged() ? res.max_deviation() : 0.0;
  run.scalar("orbit_residual") = res.orbit_residual;
  run.scalar("smallest_pivot") = res.smallest_pivot;
  run.check("converged", res.converged(), res.newton_iterations, run.i("max_iter"), res.message);
  if (!res.converged()) return;
  run.check("orbit_residual", res.orbit_residual <= 10 * run.r("tol"), res.orbit_residual, 10 * run.r("tol"));
  if (run.cfg.has("eta")) {
    const auto v = verify_exponential_shadowing(pseudo, res, run.r("eta"), run.r("theta"));
    run.scalar("worst_margin") = v.worst_margin;
    run.check("exponential_shadowing", v.pass, v.worst_margin, 0.0, "min of eta exp(-theta min(j, n_i - j)) - deviation");
  }
}

void run_close(Run& run) {
  const Point x = run.start_point(1000);
  const int n_max = run.i("n_max");
  const long T = run.cfg.integer("T");
  const auto events = find_recurrences(run.sys, x, T, run.i("n_min"), n_max, run.r("beta"), run.i("events"));
  std::vector<Point> orbit{x};
  for (long t = 0; t < T; ++t) orbit.push_back(run.sys.forward(orbit.back()));
  const auto closed = map_indices<PeriodicPoint>(events.size(), [&](std::size_t e) {
    return close_orbit(run.sys, orbit[static_cast<std::size_t>(events[e].time)], events[e].n, run.r("tol"));
  });
  auto f = run.csv("close", "event,time,n,gap,status,residual,max_deviation,hyperbolicity_margin");
  auto g = run.csv("close_deviations", "event,j,separation,deviation");
  std::vector<RateSample> samples;
  int converged = 0;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const auto& p = closed[e];
    double md = 0.0;
    if (p.converged()) {
      ++converged;
      for (int j = 0; j <= events[e].n; ++j) {
        const double d = p.closing_deviations[static_cast<std::size_t>(j)];
        const int sep = std::min(j, events[e].n - j);
        md = std::max(md, d);
        g.row(e, j, sep, d);
        // deviations at rounding level carry no rate information
        if (d > 1e-12) samples.push_back({sep, d});
      }
    }
    f.row(e, events[e].time, events[e].n, events[e].gap, status_name(p.status), p.residual, md, p.hyperbolicity_margin);
  }
  run.commit(f);
  run.commit(g);
  run.scalar("start") = point_json(x);
  run.scalar("events") = events.size();
  run.scalar("closed") = converged;
  run.check("min_closed", converged >= run.i("min_closed"), converged, run.i("min_closed"));
  if (samples.size() >= 5) {
    const auto fit = fit_rates(samples);
    run.scalar("theta_hat") = fit.theta_hat;
    run.scalar("eta_hat") = fit.eta_hat;
    run.scalar("r2") = fit.r2;
    if (run.cfg.has("min_theta")) run.check("min_theta", fit.theta_hat >= run.r("min_theta"), fit.theta_hat, run.r("min_theta"));
    if (run.cfg.has("min_r2")) run.check("min_r2", fit.r2 >= run.r("min_r2"), fit.r2, run.r("min_r2"));
  } else if (run.cfg.has("min_theta") || run.cfg.has("min_r2")) {
    run.check("rate_fit", false, static_cast<double>(samples.size()), 5, "too few closing deviations to fit rates");
  }
}

long cat_fixed_count(int n) {
  // trace(A^n) - 2 with A = [[2,1],[1,1]]
  long a = 1, b = 0, c = 0, d = 1;
  for (int k = 0; k < n; ++k) {
    const long na = 2 * a + c, nb = 2 * b + d, nc = a + c, nd = b + d;
    a = na, b = nb, c = nc, d = nd;
  }
  return a + d - 2;
}

void run_census(Run& run) {
  const int max_period = run.i("max_period");
  auto f = run.csv("census", "period,index,x1,x2,log_mu_1,log_mu_2,hyperbolicity_margin,residual");
  std::vector<long> counts;
  SpatialHash all(run.sys, run.r("radius"));
  int distinct = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= max_period; ++n) {
    const auto level = periodic_census(run.sys, n, run.i("grid_n"), run.r("radius"), run.r("tol"));
    counts.push_back(static_cast<long>(level.points.size()));
    for (std::size_t k = 0; k < level.points.size(); ++k) {
      const auto& p = level.points[k];
      f.row(n, k, p.z(0), p.z(1), p.floquet_log_moduli.at(0), p.floquet_log_moduli.at(1), p.hyperbolicity_margin, p.residual);
      worst_margin = std::min(worst_margin, p.hyperbolicity_margin);
      if (all.nearest(p.z, run.r("radius")) < 0) all.insert(distinct++, p.z);
    }
  }
  run.commit(f);
  run.scalar("points_by_period") = counts;
  run.scalar("distinct_points") = distinct;
  run.scalar("min_hyperbolicity_margin") = std::isfinite(worst_margin) ? worst_margin : 0.0;
  run.check("all_hyperbolic", worst_margin > 1e-6, std::isfinite(worst_margin) ? worst_margin : 0.0, 1e-6);
  if (run.sys.name() == "cat") {
    long worst = 0;
    for (int n = 1; n <= max_period; ++n) worst = std::max(worst, std::abs(counts[static_cast<std::size_t>(n - 1)] - cat_fixed_count(n)));
    run.check("trace_formula", worst == 0, static_cast<double>(worst), 0, "max |count(n) - (trace(A^n) - 2)|");
  }
}

PeriodicPoint anchor_for(Run& run) {
  auto p = close_orbit(run.sys, run.sys.wrap(run.cfg.point("x")), run.i("period"), run.r("tol"));
  if (!p.converged()) throw Error(ErrorCode::non_hyperbolic_anchor, std::string("anchor solve: ") + status_name(p.status));
  run.scalar("anchor") = point_json(p.z);
  run.scalar("anchor_floquet_log_moduli") = p.floquet_log_moduli;
  return p;
}

void write_patch(Run& run, const std::string& name, const ManifoldPatch& patch) {
  auto f = run.csv(name, "index,x,y");
  for (std::size_t k = 0; k < patch.polyline.size(); ++k) {
    const Point p = run.sys.wrap(patch.polyline[k]);
    f.row(k, p(0), p(1));
  }
  run.commit(f);
}

void run_manifolds(Run& run) {
  const auto anchor = anchor_for(run);
  const double len = run.r("length"), h = run.r("h");
  const auto pu = grow_manifold(run.sys, anchor, ManifoldKind::unstable, len, h);
  const auto ps = grow_manifold(run.sys, anchor, ManifoldKind::stable, len, h);
  write_patch(run, "manifold_unstable", pu);
  write_patch(run, "manifold_stable", ps);
  const auto prof = contraction_profile(run.sys, ps, run.i("n_max"));
  const auto fit = fit_contraction(prof);
  auto f = run.csv("manifold_profile", "n,ratio,residual");
  for (std::size_t k = 0; k < prof.size(); ++k) f.row(prof[k].n, prof[k].ratio, fit.residuals.at(k));
  run.commit(f);
  const auto rep = find_transverse_intersections(run.sys, pu, ps, run.r("min_angle"));
  auto g = run.csv("manifold_crossings", "index,x,y,angle,u_segment,s_segment,at_anchor,transverse");
  int homoclinic = 0, row = 0;
  double min_angle = std::numbers::pi / 2;
  for (const auto* list : {&rep.transverse, &rep.near_tangent}) {
    for (const auto& c : *list) {
      const bool transverse = list == &rep.transverse;
      g.row(row++, c.point(0), c.point(1), c.angle, c.u_segment, c.s_segment, c.at_anchor ? 1 : 0, transverse ? 1 : 0);
      if (transverse && !c.at_anchor) {
        ++homoclinic;
        min_angle = std::min(min_angle, c.angle);
      }
    }
  }
  run.commit(g);
  run.scalar("unstable_length") = pu.total_length;
  run.scalar("stable_length") = ps.total_length;
  run.scalar("unstable_generations") = pu.generation;
  run.scalar("stable_generations") = ps.generation;
  run.scalar("curvature_blowup") = pu.curvature_blowup || ps.curvature_blowup;
  run.scalar("C_bar") = fit.C_bar;
  run.scalar("zeta_bar") = fit.zeta_bar;
  run.scalar("contraction_r2") = fit.r2;
  run.scalar("transverse_crossings") = rep.transverse.size();
  run.scalar("homoclinic_crossings") = homoclinic;
  run.scalar("near_tangencies") = rep.near_tangent.size();
  if (homoclinic > 0) run.scalar("min_homoclinic_angle") = min_angle;
  const double worst_res = *std::max_element(fit.residuals.begin(), fit.residuals.end());
  run.check("contraction_certified", fit.zeta_bar > 0.0 && worst_res <= 1e-12, fit.zeta_bar, 0.0,
            "zeta_bar > 0 with ratio(n) <= C_bar exp(-zeta_bar n) at every n");
  if (run.cfg.has("min_zeta")) run.check("min_zeta", fit.zeta_bar >= run.r("min_zeta"), fit.zeta_bar, run.r("min_zeta"));
}

std::vector<Point> prefix(const std::vector<Point>& poly, double length) {
  std::vector<Point> out{poly.front()};
  double acc = 0.0;
  for (std::size_t k = 1; k < poly.size(); ++k) {
    const double seg = (poly[k] - poly[k - 1]).norm();
    if (acc + seg >= length) {
      out.push_back(poly[k - 1] + (seg > 0 ? (length - acc) / seg : 0.0) * (poly[k] - poly[k - 1]));
      return out;
    }
    acc += seg;
    out.push_back(poly[k]);
  }
  return out;
}

void run_coverage(Run& run) {
  const auto anchor = anchor_for(run);
  const auto pu = grow_manifold(run.sys, anchor, ManifoldKind::unstable, run.r("length"), run.r("h"));
  std::vector<double> lengths;
  for (double l = run.r("length_min"); l < pu.total_length; l *= 2) lengths.push_back(l);
  lengths.push_back(pu.total_length);
  const int grid = run.i("grid_n");
  const auto cov = map_indices<double>(lengths.size(), [&](std::size_t k) {
    ManifoldPatch part = pu;
    part.polyline = prefix(pu.polyline, lengths[k]);
    if (run.cfg.has("box")) {
      const auto b = run.cfg.reals("box");
      return closure_coverage_box(part, grid, {Point(b[0], b[1]), Point(b[2], b[3])});
    }
    return closure_coverage(run.sys, part, grid);
  });
  auto f = run.csv("coverage", "length,coverage");
  double worst_step = 0.0;
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    f.row(lengths[k], cov[k]);
    if (k > 0) worst_step = std::min(worst_step, cov[k] - cov[k - 1]);
  }
  run.commit(f);
  run.scalar("length") = pu.total_length;
  run.scalar("coverage") = cov.back();
  run.scalar("curvature_blowup") = pu.curvature_blowup;
  run.check("monotone", worst_step >= 0.0, worst_step, 0.0);
  if (run.cfg.has("min_coverage"))
    run.check("min_coverage", cov.back() >= run.r("min_coverage"), cov.back(), run.r("min_coverage"));
}

void run_livshitz(Run& run) {
  const auto name = run.cfg.text("observable");
  const auto phi = observable_from_name(run.sys, name);
  const auto scan = obstruction_scan(run.sys, phi, run.i("max_period"), run.i("grid_n"));
  auto f = run.csv("livshitz_obstruction", "period,x1,x2,sum");
  for (const auto& e : scan.entries) f.row(e.point.period, e.point.z(0), e.point.z(1), e.sum);
  run.commit(f);
  const Point x = run.start_point(0);
  const auto table = reconstruct_transfer(run.sys, phi, x, run.cfg.integer("N"));
  auto g = run.csv("livshitz_transfer", "n,x1,x2,psi");
  for (const auto& s : table.samples) g.row(s.n, s.point(0), s.point(1), s.psi);
  run.commit(g);
  auto radii = run.cfg.reals("radius_grid");
  radii.push_back(run.r("radius"));
  const auto prof = near_return_profile(run.sys, table, radii);
  auto h = run.csv("livshitz_residual", "radius,residual");
  std::vector<std::pair<double, double>> data;
  for (std::size_t k = 0; k + 1 < radii.size(); ++k) {
    if (!prof[k]) continue;
    h.row(radii[k], *prof[k]);
    data.emplace_back(radii[k], *prof[k]);
  }
  run.commit(h);

  run.scalar("base") = point_json(x);
  run.scalar("orbits_scanned") = scan.entries.size();
  run.scalar("scan_complete") = scan.complete;
  run.scalar("worst_relative_obstruction") = scan.worst_relative();
  if (auto p = scan.first_obstruction()) run.scalar("first_obstruction_period") = *p;
  else run.scalar("first_obstruction_period") = nullptr;
  run.check("scan_complete", scan.complete, scan.complete ? 1.0 : 0.0, 1.0, scan.failure);
  if (!prof.back()) throw Error(ErrorCode::no_pairs, "no near-returns within the radius; increase N");
  const double residual = *prof.back();
  run.scalar("residual") = residual;
  if (data.size() >= 3) {
    const auto fit = fit_holder(data);
    run.scalar("holder_degenerate") = fit.degenerate;
    run.scalar("C_hat") = fit.C_hat;
    run.scalar("kappa_hat") = fit.kappa_hat;
    run.scalar("holder_r2") = fit.r2;
  }
  if (run.cfg.text("expect") == "coboundary") {
    const double w = scan.worst_relative();
    run.check("obstructions_vanish", w <= 1e-9, w, 1e-9, "max |periodic sum| / period");
    if (name.rfind("cob_", 0) == 0) {
      // psi = g - g(x) along the orbit, so near returns differ by at most g's modulus
      const auto gen = observable_from_name(run.sys, name.substr(4));
      const double bound = gen.holder->C * std::pow(run.r("radius"), gen.holder->kappa);
      run.check("residual_bound", residual <= bound, residual, bound, "near-return psi discrepancy");
    }
  } else {
    const auto p = scan.first_obstruction();
    run.check("obstruction_found", p.has_value(), p ? *p : 0.0, run.i("max_period"), "first period with a nonzero sum");
  }
}

void write_report(const fs::path& path, const RunReport& report) {
  const fs::path partial = path.string() + ".partial";
  {
    std::ofstream out(partial);
    out << report.to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + partial.string());
  }
  fs::rename(partial, path);
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  RunReport report;
  report.config = config.echo();
  report.threads = thread_count();
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  try {
    Run run{config, config.make_system(), out_dir, report};
    const auto& e = config.experiment;
    if (e == "lyapunov") run_lyapunov(run);
    else if (e == "pesin-block") run_pesin(run);
    else if (e == "shadow") run_shadow(run);
    else if (e == "close") run_close(run);
    else if (e == "census") run_census(run);
    else if (e == "manifolds") run_manifolds(run);
    else if (e == "coverage") run_coverage(run);
    else if (e == "livshitz") run_livshitz(run);
    else invalid("unknown experiment '" + e + "'");
  } catch (const Error& err) {
    report.error = RunError{std::string(error_name(err.code())), err.what(), err.index()};
  } catch (const std::exception& err) {
    report.error = RunError{"InternalError", err.what(), std::nullopt};
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report(out_dir / (config.output + "_report.json"), report);
  return report;
}

}  // namespace pesinlab
