#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pesinlab {

enum class ErrorCode {
  invalid_system,
  orbit_escape,
  degenerate_splitting,
  rank_deficient,
  witness_invalid,
  no_recurrence,
  pool_exhausted,
  newton_diverged,
  ill_conditioned,
  insufficient_data,
  non_hyperbolic_anchor,
  domain_unsupported,
  no_pairs,
  config_invalid,
};

std::string_view error_name(ErrorCode code);

/// Every failure raised by the library. `index` carries the orbit index
/// (or sample index) at which the failure was detected, when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<long> index = std::nullopt)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code), index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<long> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<long> index_;
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_system: return "InvalidSystem";
    case ErrorCode::orbit_escape: return "OrbitEscape";
    case ErrorCode::degenerate_splitting: return "DegenerateSplitting";
    case ErrorCode::rank_deficient: return "RankDeficient";
    case ErrorCode::witness_invalid: return "WitnessInvalid";
    case ErrorCode::no_recurrence: return "NoRecurrence";
    case ErrorCode::pool_exhausted: return "PoolExhausted";
    case ErrorCode::newton_diverged: return "NewtonDiverged";
    case ErrorCode::ill_conditioned: return "IllConditioned";
    case ErrorCode::insufficient_data: return "InsufficientData";
    case ErrorCode::non_hyperbolic_anchor: return "NonHyperbolicAnchor";
    case ErrorCode::domain_unsupported: return "DomainUnsupported";
    case ErrorCode::no_pairs: return "NoPairs";
    case ErrorCode::config_invalid: return "ConfigInvalid";
  }
  return "Unknown";
}

}  // namespace pesinlab
