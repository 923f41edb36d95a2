#pragma once

// Finite-horizon Pesin block classification: conditions (a) contraction on
// E, (b) backward expansion on F, (c) domination, each reported as a slack.

#include <cstdint>
#include <optional>
#include <vector>

#include "pesinlab/cocycle.hpp"
#include "pesinlab/pseudo_orbit.hpp"

namespace pesinlab {

struct PesinParams {
  int K = 1;
  double zeta = 0.5;
  int k_max = 10;
  /// Largest l tested; >= k_max.
  int horizon = 20;
  /// Sweep length used to converge the bundles at the ends of the window.
  int sweep = 30;

  void validate() const;
};

struct BlockMargins {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double worst() const;
};

struct BlockVerdict {
  Point point;
  std::optional<int> k;
  /// Margins at k, or at k_max when no level within the horizon works.
  BlockMargins margins;
};

/// Orbit window a classification needs: t in [-(horizon + 1) K - sweep,
/// 2 horizon K + sweep].
int pesin_window_back(const PesinParams& params);
int pesin_window_forward(const PesinParams& params);

/// Precomputed bundles and prefix sums for one orbit; answers margins for
/// any level k in O(horizon K).
class BlockAnalysis {
 public:
  BlockAnalysis(const MapSystem& system, OrbitWindow window, const PesinParams& params);

  const Point& point() const { return splitting_.orbit.at(0); }
  const OrbitSplitting& splitting() const { return splitting_; }
  BlockMargins margins(int k) const;
  /// Condition (c) alone: min over l in [-horizon K, horizon K] and
  /// L in {K, 2K, 4K, ...} <= horizon K of (-2 zeta - ratio).
  double margin_c() const { return margin_c_; }
  BlockVerdict verdict() const;

 private:
  PesinParams params_;
  OrbitSplitting splitting_;
  std::vector<double> a_suffix_;  // index l - 1: min over l' >= l of the (a) slack
  std::vector<double> b_suffix_;
  double margin_c_ = 0.0;
};

/// Splitting obtained from a window built with the inverse map.
BlockMargins check_block_conditions(const MapSystem& system, const Point& x, const PesinParams& params, int k);
BlockVerdict classify_block(const MapSystem& system, const Point& x, const PesinParams& params);
/// Same on a caller-provided window (e.g. from forward history on an attractor).
BlockVerdict classify_block(const MapSystem& system, OrbitWindow window, const PesinParams& params);

struct Sampler {
  int count = 1000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
};

struct BlockMeasure {
  double fraction = 0.0;      // at the requested k
  std::vector<double> by_k;   // index k - 1, k in [1, k_max]
  int classified = 0;         // samples that entered the denominator
  int escaped = 0;            // discarded (plane systems)
  int degenerate = 0;         // counted as outside every block
  std::vector<std::optional<int>> levels;  // per sample; escaped samples hold nullopt too
};

/// Sample i is drawn uniformly from the sampling box with a generator seeded
/// by task_seed(seed, i), iterated burn_in steps, and classified on a window
/// built from its forward history.
BlockMeasure estimate_block_measure(const MapSystem& system, const PesinParams& params, int k, const Sampler& sampler,
                                    Execution exec = Execution::parallel);

/// z is in the extended block iff its orbit sigma-shadows the witness over the
/// window: distance(f^{c_i + j}(z), f^j(x_i)) < sigma for every segment i and
/// j in [0, n_i]. Raises WitnessInvalid when some n_i < 2 k K or a segment
/// endpoint is not in Lambda_k.
bool extended_block_membership(const MapSystem& system, const Point& z, const PesinParams& params, int k,
                               double sigma, const PseudoOrbit& witness);

}  // namespace pesinlab
