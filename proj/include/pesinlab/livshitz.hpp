#pragma once

// Periodic obstruction sums, telescoping reconstruction of a transfer
// function psi along one orbit, and near-return consistency checks.

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pesinlab/shadowing.hpp"

namespace pesinlab {

struct HolderConstants {
  double C = 0.0;
  double kappa = 1.0;
};

struct Observable {
  std::string name;
  std::function<double(const Point&)> eval;
  std::optional<HolderConstants> holder;

  double operator()(const Point& x) const { return eval(x); }
};

Observable constant_observable(double c);
/// sin 2 pi x1; not a coboundary for the cat map.
Observable sin_x1();
/// x1 - 1/2, discontinuous on the torus (no Holder constants).
Observable centred_x1();
/// phi = g o f - g. Holder constants follow from g's and the Lipschitz
/// constant of f.
Observable coboundary_of(const MapSystem& system, const Observable& g);
/// The generating library of g's, each 2 pi-Lipschitz.
std::vector<Observable> coboundary_generators();
/// coboundary_of(system, g) for every generator, named "cob_<g>".
std::vector<Observable> builtin_coboundaries(const MapSystem& system);
/// "zero", "sin_x1", "centred_x1", "const:<c>", a generator name or "cob_<g>".
Observable observable_from_name(const MapSystem& system, const std::string& name);
std::vector<std::string> observable_names();

/// Compensated sum of phi over the orbit of p. Raises InsufficientData when
/// p is not a verified periodic point (residual >= 1e-10).
double periodic_sum(const MapSystem& system, const Observable& phi, const PeriodicPoint& p);

struct ObstructionEntry {
  PeriodicPoint point;  // orbit representative, period = minimal period
  double sum = 0.0;
};

struct ObstructionScan {
  std::vector<ObstructionEntry> entries;  // by period, then census order
  int max_period = 0;
  /// False when a census level failed; entries hold the levels before it.
  bool complete = true;
  std::string failure;

  /// max |sum| / period, 0 when empty.
  double worst_relative() const;
  /// First period with |sum| > tol * period.
  std::optional<int> first_obstruction(double tol = 1e-9) const;
};

/// Census levels 1..max_period on a grid_n x grid_n seed grid.
std::vector<CensusLevel> census_up_to(const MapSystem& system, int max_period, int grid_n = 512,
                                      Execution exec = Execution::parallel);
/// One entry per periodic orbit of minimal period <= max_period.
ObstructionScan obstruction_scan(const MapSystem& system, const Observable& phi, const std::vector<CensusLevel>& census);
ObstructionScan obstruction_scan(const MapSystem& system, const Observable& phi, int max_period, int grid_n = 512,
                                 Execution exec = Execution::parallel);

struct TransferSample {
  long n;
  Point point;
  double psi;
};

struct TransferTable {
  Point base;
  std::string observable;
  std::vector<TransferSample> samples;  // n = 0..N
};

/// psi(f^n x) = sum_{k<n} phi(f^k x), Kahan-summed. Raises OrbitEscape.
TransferTable reconstruct_transfer(const MapSystem& system, const Observable& phi, const Point& x, long N);

/// max |psi_a - psi_b| over sample pairs closer than radius. Raises NoPairs.
double coboundary_residual(const MapSystem& system, const TransferTable& table, double radius,
                           Execution exec = Execution::parallel);
/// The residual at every radius (nullopt where no pair exists), from one
/// pair enumeration at the largest radius.
std::vector<std::optional<double>> near_return_profile(const MapSystem& system, const TransferTable& table,
                                                       const std::vector<double>& radii,
                                                       Execution exec = Execution::parallel);

struct HolderFit {
  double C_hat = 0.0;
  double kappa_hat = 0.0;
  double r2 = 0.0;
  /// All discrepancies zero: nothing to fit.
  bool degenerate = false;
};

/// log-log fit of discrepancy against radius. Zero discrepancies are dropped;
/// all zero gives a degenerate fit. Raises InsufficientData below 3 radii.
HolderFit fit_holder(const std::vector<std::pair<double, double>>& radius_discrepancy);
HolderFit holder_estimate(const MapSystem& system, const TransferTable& table, const std::vector<double>& radius_grid,
                          Execution exec = Execution::parallel);

/// Columns n,x1,x2,psi.
void write_transfer_csv(std::ostream& out, const TransferTable& table);

}  // namespace pesinlab
