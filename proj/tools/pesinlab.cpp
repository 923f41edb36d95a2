// pesinlab command line: run, validate and list-systems.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pesinlab/error.hpp"
#include "pesinlab/kernels.hpp"
#include "pesinlab/runner.hpp"

using namespace pesinlab;

namespace {

constexpr int code(ExitCode c) { return static_cast<int>(c); }

// --threads wins over PESINLAB_THREADS; neither leaves the OpenMP default.
std::optional<int> resolve_threads(int flag) {
  if (flag > 0) return flag;
  const char* env = std::getenv("PESINLAB_THREADS");
  if (!env || !*env) return std::nullopt;
  try {
    std::size_t used = 0;
    const int n = std::stoi(env, &used);
    if (used == std::string(env).size() && n >= 1) return n;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config_invalid, std::string("PESINLAB_THREADS must be a positive integer, got '") + env + "'");
}

int list_systems() {
  for (const auto& name : MapSystem::builtin_names()) {
    const auto s = MapSystem::from_name(name);
    std::cout << name << " (" << (s.domain() == Domain::torus ? "torus" : "plane") << ")";
    for (const auto& p : s.parameters()) std::cout << ' ' << p.name << '=' << p.value;
    std::cout << '\n';
  }
  return 0;
}

int run(const std::string& config_path, const std::string& out, int threads_flag) {
  ExperimentConfig cfg;
  try {
    if (auto t = resolve_threads(threads_flag)) set_thread_count(*t);
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return code(ExitCode::config_invalid);
  }
  const auto report = run_experiment(cfg, out);
  for (const auto& c : report.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold << '\n';
  if (report.error) std::cerr << report.error->message << '\n';
  std::cout << "report " << (std::filesystem::path(out) / (cfg.output + "_report.json")).string() << '\n';
  return code(report.exit_code());
}

int validate(const std::string& config_path) {
  try {
    const auto cfg = load_config(config_path);
    std::cout << "ok " << cfg.experiment << " on " << cfg.system << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return code(ExitCode::config_invalid);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on hyperbolic maps of the plane and torus"};
  app.require_subcommand(1);

  std::string config_path, out = ".";
  int threads = 0;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run_cmd->add_option("--config", config_path, "Config file")->required();
  run_cmd->add_option("--out", out, "Output directory")->capture_default_str();
  run_cmd->add_option("--threads", threads, "Worker threads (default: PESINLAB_THREADS, then OpenMP)")
      ->check(CLI::PositiveNumber);

  auto* list_cmd = app.add_subcommand("list-systems", "List the built-in maps and their default parameters");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("--config", validate_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::config_invalid);
  }

  try {
    if (*run_cmd) return run(config_path, out, threads);
    if (*list_cmd) return list_systems();
    if (*validate_cmd) return validate(validate_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return code(ExitCode::error);
  }
  return code(ExitCode::error);
}
