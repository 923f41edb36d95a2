#pragma once

// Pseudo-orbits from recurrences, Newton multiple shooting to true orbits and
// periodic points, and the exponential shadowing / closing checks.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pesinlab/pseudo_orbit.hpp"

namespace pesinlab {

enum class SolveStatus { converged, newton_diverged, ill_conditioned };
const char* status_name(SolveStatus s);

struct Deviation {
  int segment;  // i
  int step;     // j in [0, n_i]
  double value;
};

struct ShadowResult {
  SolveStatus status = SolveStatus::converged;
  std::string message;
  /// y_0 ... y_N; for a periodic window y_N is omitted (it equals y_0).
  std::vector<Point> orbit;
  bool periodic = false;
  /// max_j distance(f(y_j), y_{j+1}), wrapping for periodic windows.
  double orbit_residual = 0.0;
  std::vector<Deviation> deviations;
  /// max deviation (the tightest eta at theta = 0).
  double eta = 0.0;
  double theta = 0.0;
  int newton_iterations = 0;
  double smallest_pivot = 0.0;

  bool converged() const { return status == SolveStatus::converged; }
  double max_deviation() const;
};

/// max_j distance(f(y_j), y_{j+1}); for periodic orbits the pair (y_{N-1}, y_0)
/// is included.
double orbit_residual(const MapSystem& system, const std::vector<Point>& orbit, bool periodic);

/// Damped Newton on f(y_j) - y_{j+1} = 0 seeded by the concatenated
/// pseudo-orbit. Non-periodic windows close with y_0-correction in E^u(y_0)
/// and y_N-correction in E^s(y_N). Failure is reported through `status`.
ShadowResult newton_shadow(const MapSystem& system, const PseudoOrbit& pseudo, double tol = 1e-12,
                           int max_iter = 50);

struct ShadowCheck {
  bool pass = false;
  double worst_margin = 0.0;
  /// eta exp(-min(j, n_i - j) theta) - deviation(i, j), in deviation order.
  std::vector<double> margins;
};

ShadowCheck verify_exponential_shadowing(const PseudoOrbit& pseudo, const ShadowResult& result, double eta,
                                         double theta);

struct PeriodicPoint {
  Point z;
  int period = 0;
  /// log|mu| for the eigenvalues of Df^n(z), ascending.
  std::vector<double> floquet_log_moduli;
  double hyperbolicity_margin = 0.0;
  /// distance(f^j(x), f^j(z)), j in [0, n].
  std::vector<double> closing_deviations;
  std::vector<Point> orbit;  // z, f(z), ..., f^{n-1}(z)
  SolveStatus status = SolveStatus::converged;
  double residual = 0.0;
  int newton_iterations = 0;

  bool converged() const { return status == SolveStatus::converged; }
  bool hyperbolic() const { return hyperbolicity_margin > 1e-6; }
};

/// Eigenvalue log-moduli of Df^n(z), robust to |mu| beyond e^{+-700}.
std::vector<double> floquet_log_moduli(const MapSystem& system, const Point& z, int n);

PeriodicPoint close_orbit(const MapSystem& system, const Point& x, int n, double tol = 1e-12, int max_iter = 50);

struct CensusLevel {
  int n = 0;
  std::vector<PeriodicPoint> points;  // distinct points of period dividing n
  int seeds = 0;
  int converged_seeds = 0;
};

/// close_orbit from every cell centre of a grid_n x grid_n seed grid; every
/// orbit point of a converged solve is collected and points within `radius`
/// merged.
CensusLevel periodic_census(const MapSystem& system, int n, int grid_n = 512, double radius = 1e-6,
                            double tol = 1e-12, Execution exec = Execution::parallel);

struct RateFit {
  double theta_hat = 0.0;
  double eta_hat = 0.0;
  double r2 = 0.0;
};
struct RateSample {
  int separation;
  double deviation;
};
/// Least squares of log deviation on separation; deviations floored at 1e-15.
RateFit fit_rates(const std::vector<RateSample>& samples);

struct LipschitzFit {
  double L_hat = 0.0;
  double r2 = 0.0;
};
struct LipschitzSample {
  double delta;
  double max_deviation;
};
/// Zero-intercept least squares max_deviation = L delta.
LipschitzFit fit_lipschitz(const std::vector<LipschitzSample>& samples);

using BlockTest = std::function<bool(const Point&)>;

struct RecurrenceOptions {
  double delta = 1e-3;
  int min_length = 20;  // T
  int max_segments = 10;
  /// Restart points; empty means every segment continues the exact orbit.
  std::vector<Point> pool;
  /// Close after max_segments with a jump back onto x_0.
  bool periodic = false;
  long budget = 1000000;
};

/// Cuts the forward orbit from x at accepted returns (n_i >= T); each new
/// segment restarts at the nearest pool point within delta of the endpoint.
/// Raises NoRecurrence when no accepted return occurs within the budget and
/// PoolExhausted when accepted returns occur but none is within delta of the
/// pool.
PseudoOrbit build_recurrent_pseudo_orbit(const MapSystem& system, const Point& x, const BlockTest& block_test,
                                         const RecurrenceOptions& options);

struct RecurrenceEvent {
  long time;
  int n;
  double gap;
};
/// Times t along the orbit of x (t < length) with distance(f^t x, f^{t+n} x)
/// < beta for some n in [n_min, n_max], keeping the smallest such n and
/// skipping ahead by n after each event.
std::vector<RecurrenceEvent> find_recurrences(const MapSystem& system, const Point& x, long length, int n_min,
                                              int n_max, double beta, int max_events);

}  // namespace pesinlab
