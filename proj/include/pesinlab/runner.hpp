#pragma once

// Batch experiments driven by a JSON config: validation, execution, CSV
// emission and the JSON run report.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pesinlab/dynsys.hpp"

namespace pesinlab {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class ExitCode : int { pass = 0, error = 1, checks_failed = 2, config_invalid = 64 };

enum class ParamKind { integer, real, real_list, point, text };

struct ParamSpec {
  std::string key;
  ParamKind kind;
  bool required = false;
  Json fallback;                      // null: no default
  std::optional<double> min;          // inclusive, for numbers and list items
  std::string doc;
};

const std::vector<std::string>& experiment_names();
/// Accepted keys per experiment besides system, system_params, experiment,
/// seed and output.
const std::vector<ParamSpec>& experiment_schema(const std::string& experiment);

struct ExperimentConfig {
  std::string system;
  std::map<std::string, double> system_params;
  std::string experiment;
  std::uint64_t seed = 0;
  std::string output;
  /// Every schema key that is set, defaults filled in, in schema order.
  Json params = Json::object();

  MapSystem make_system() const;
  bool has(const std::string& key) const { return params.contains(key); }
  double real(const std::string& key) const { return params.at(key).get<double>(); }
  long integer(const std::string& key) const { return params.at(key).get<long>(); }
  std::vector<double> reals(const std::string& key) const { return params.at(key).get<std::vector<double>>(); }
  Point point(const std::string& key) const;
  std::string text(const std::string& key) const { return params.at(key).get<std::string>(); }
  /// Normalised config, as echoed in the report.
  Json echo() const;
};

/// Raises Error(ConfigInvalid) naming the offending key.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& file);

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct RunError {
  std::string name;
  std::string message;
  std::optional<long> index;
};

struct RunReport {
  Json config;
  std::vector<Check> checks;
  Json scalars = Json::object();
  std::vector<std::string> csv_files;
  double wall_seconds = 0.0;
  int threads = 1;
  std::optional<RunError> error;

  bool passed() const;
  ExitCode exit_code() const;
  Json to_json() const;
};

/// Runs the experiment, writing <output>_<name>.csv files and
/// <output>_report.json under out_dir. Library errors are captured in the
/// report; CSV files are written as .partial and renamed once complete.
RunReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace pesinlab
