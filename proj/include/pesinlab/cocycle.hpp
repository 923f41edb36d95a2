#pragma once

// Finite-time analysis of the derivative cocycle Df^n: factored products,
// Lyapunov exponents, Oseledec splitting estimates, restricted norms and
// conorms, domination margins and block Birkhoff averages.
//
// Norm growth is always tracked in log space through per-step QR
// renormalisation; raw Df^n is only ever formed by `CocycleProduct::evaluate`.

#include <array>
#include <vector>

#include "pesinlab/dynsys.hpp"

namespace pesinlab {

/// Orthonormal columns spanning a subspace of R^2.
using Basis = Eigen::Matrix<double, 2, Eigen::Dynamic>;

struct QrFactor {
  Mat2 q;  // rotation
  Mat2 r;  // upper triangular
};

/// Df^n(x) stored as successive QR steps: Df(x_k) Q_{k-1} = Q_k R_k, so that
/// Df^n(x) = Q_n R_n ... R_1. The accumulated triangular product is kept as
/// exp(log_scale) * r_normalized, which keeps singular values up to e^{+-700}
/// and beyond representable.
class CocycleProduct {
 public:
  CocycleProduct() = default;

  void push(const Mat2& jacobian);

  int length() const { return static_cast<int>(factors_.size()); }
  const std::vector<QrFactor>& factors() const { return factors_; }
  /// Explicit product. Overflows for long horizons; intended for n <= 30.
  Mat2 evaluate() const;
  /// log singular values, descending.
  std::array<double, 2> log_singular_values() const;
  double log_abs_det() const { return log_abs_det_; }

 private:
  std::vector<QrFactor> factors_;
  Mat2 q_ = Mat2::Identity();
  Mat2 r_hat_ = Mat2::Identity();
  double log_scale_ = 0.0;
  double log_abs_det_ = 0.0;
};

/// Raises OrbitEscape (index = step) when a plane orbit diverges.
CocycleProduct cocycle_product(const MapSystem& system, const Point& x, int n);

struct LyapunovSpectrum {
  std::vector<double> exponents;    // ascending
  std::vector<int> multiplicities;  // one entry per cluster of exponents
  int horizon = 0;
};

/// (1/n) log of the singular values of Df^n(x); exponents closer than `gap`
/// are clustered into one multiplicity.
LyapunovSpectrum finite_time_exponents(const MapSystem& system, const Point& x, int n, double gap = 0.05);

struct SplittingEstimate {
  Point point;
  Basis stable_basis;
  Basis unstable_basis;
  int forward_horizon = 0;
  int backward_horizon = 0;
  /// Grassmannian distance between the horizon-m and horizon-(m-1) estimates.
  double residual = 0.0;
};

/// E^u(x) from a generic vector pushed forward m steps from f^-m(x); E^s(x)
/// from a generic vector pushed back m steps from f^m(x). Raises
/// DegenerateSplitting when the residual stops decreasing (above 1e-10) over
/// the last five horizons or the two bundles coincide.
SplittingEstimate estimate_splitting(const MapSystem& system, const Point& x, int m);

/// Principal angle between two lines (radians, in [0, pi/2]).
double line_distance(const Vec2& u, const Vec2& v);
/// Grassmannian distance between subspaces of equal dimension.
double grassmann_distance(const Basis& a, const Basis& b);

/// Both bundles along an orbit window, from one forward and one backward
/// sweep. Bundles are valid on [valid_first, valid_last], i.e. the window
/// shrunk by `m` on each side, so every vector has been pushed >= m steps.
struct OrbitSplitting {
  OrbitWindow orbit;
  int valid_first = 0;
  int valid_last = 0;
  std::vector<Vec2> stable;    // unit vectors, index t - valid_first
  std::vector<Vec2> unstable;
  /// log |Df(f^t x) e(t)| for t in [valid_first, valid_last - 1].
  std::vector<double> stable_log_stretch;
  std::vector<double> unstable_log_stretch;

  const Vec2& stable_at(int t) const { return stable.at(static_cast<std::size_t>(t - valid_first)); }
  const Vec2& unstable_at(int t) const { return unstable.at(static_cast<std::size_t>(t - valid_first)); }
};

OrbitSplitting split_along_orbit(const MapSystem& system, OrbitWindow window, int m);

/// log singular values (descending) of Df^n(x) restricted to span(subspace).
std::vector<double> restricted_log_singular_values(const MapSystem& system, const Point& x, int n,
                                                   const Basis& subspace);
/// log |Df^n(x)|_E|. Raises RankDeficient if the subspace or its image loses rank.
double restricted_norm(const MapSystem& system, const Point& x, int n, const Basis& subspace);
/// log m(Df^n(x)|_F).
double restricted_conorm(const MapSystem& system, const Point& x, int n, const Basis& subspace);

/// E^s along f^t(x), t in [0, n], from a backward sweep started m steps
/// beyond f^n(x). Uses forward iterates only.
std::vector<Vec2> stable_bundle_along(const MapSystem& system, const Point& x, int n, int m = 30);

/// E and F are read as the bundles of an invariant splitting at x: a line
/// agreeing with E^s(x) to 1e-6 rad is carried along the orbit by the
/// backward sweep, since pushing it forward is numerically unstable.
/// min over S in [s_min, s_max] of -(1/S) (log|Df^S|_E| - log m(Df^S|_F)).
/// (E, F) is (s_min, lambda)-dominated over the window iff the result >= 2 lambda.
double domination_margin(const MapSystem& system, const Point& x, const Basis& e, const Basis& f, int s_min,
                         int s_max);

enum class BundleSelector { stable, unstable };

/// (1/(l K)) sum_j log|Df^K|_{E^s}| (or log m(Df^K|_{E^u})) at f^{jK}(x),
/// re-estimating the splitting (horizon m) at every block start.
double birkhoff_block_average(const MapSystem& system, const Point& x, int block, int count,
                              BundleSelector selector, int m = 30);

}  // namespace pesinlab
