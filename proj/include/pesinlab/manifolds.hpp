#pragma once

// One-dimensional stable and unstable manifolds of hyperbolic periodic points
// as polylines: growth, contraction profiles, transverse crossings, and grid
// coverage.

#include <array>
#include <ostream>
#include <vector>

#include "pesinlab/shadowing.hpp"

namespace pesinlab {

enum class ManifoldKind { stable, unstable };
const char* kind_name(ManifoldKind k);

struct ManifoldPatch {
  PeriodicPoint anchor;
  ManifoldKind kind = ManifoldKind::unstable;
  /// Lifted (unwrapped) coordinates; polyline[0] is anchor.z. Segments are
  /// straight in the plane, so torus patches may leave the unit square.
  std::vector<Point> polyline;
  /// Unit tangent at the anchor (Floquet eigendirection).
  Vec2 direction = Vec2::UnitX();
  double h = 0.0;
  int generation = 0;
  double total_length = 0.0;
  /// Arc length after each generation, before truncation.
  std::vector<double> length_history;
  /// Set when adjacent segments turned by more than 60 degrees; the patch is
  /// the last generation before that happened.
  bool curvature_blowup = false;
};

double polyline_length(const std::vector<Point>& polyline);

/// Grows one branch from the fundamental segment [z, z + 1e-6 v] by
/// f^period (f^-period for stable patches), inserting image midpoints so that
/// no segment exceeds h, until target_length or 60 generations; the result is
/// cut at target_length. Raises NonHyperbolicAnchor.
ManifoldPatch grow_manifold(const MapSystem& system, const PeriodicPoint& anchor, ManifoldKind kind,
                            double target_length, double h);

struct ProfilePoint {
  int n;
  double ratio;
};

/// ratio(n) = diam(F^n(patch)) / diam(patch) with F = f^period for stable
/// patches and f^-period for unstable ones, n in [0, n_max]. Vertices are
/// carried as displacements from the anchor and re-projected onto the patch
/// after every step, so rounding never leaves the manifold.
std::vector<ProfilePoint> contraction_profile(const MapSystem& system, const ManifoldPatch& patch, int n_max,
                                              Execution exec = Execution::parallel);

struct ContractionFit {
  double C_bar = 0.0;
  double zeta_bar = 0.0;
  double r2 = 0.0;
  /// log ratio(n) - (log C_bar - zeta_bar n) <= 0 for every n.
  std::vector<double> residuals;
};
/// zeta_bar from least squares on log ratio; C_bar is the smallest constant
/// with ratio(n) <= C_bar exp(-zeta_bar n) at every measured n.
ContractionFit fit_contraction(const std::vector<ProfilePoint>& profile);

struct Crossing {
  Point point;   // canonical (wrapped) position
  double angle;  // in [0, pi/2]
  int u_segment;
  int s_segment;
  bool at_anchor;  // within h of either anchor
};

struct IntersectionReport {
  std::vector<Crossing> transverse;
  /// Crossings below min_angle.
  std::vector<Crossing> near_tangent;
};

/// All crossings between the polylines, testing the nine unit translates on
/// the torus; crossings within `merge_radius` (default: the larger h) merged.
IntersectionReport find_transverse_intersections(const MapSystem& system, const ManifoldPatch& patch_u,
                                                 const ManifoldPatch& patch_s, double min_angle = 0.1,
                                                 double merge_radius = -1.0, Execution exec = Execution::parallel);
/// All-pairs reference of the same computation.
IntersectionReport find_transverse_intersections_brute(const MapSystem& system, const ManifoldPatch& patch_u,
                                                       const ManifoldPatch& patch_s, double min_angle = 0.1,
                                                       double merge_radius = -1.0);

/// Fraction of grid_n x grid_n cells of T^2 met by the polyline. Raises
/// DomainUnsupported on plane systems.
double closure_coverage(const MapSystem& system, const ManifoldPatch& patch, int grid_n);
/// Same over an explicit box (plane systems); points outside are ignored.
double closure_coverage_box(const ManifoldPatch& patch, int grid_n, const std::array<Point, 2>& box);

/// Hausdorff distance between two polylines (vertex-to-polyline, both ways).
double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b);

/// Columns index,x,y; torus coordinates wrapped into [0,1).
void write_polyline_csv(std::ostream& out, const MapSystem& system, const ManifoldPatch& patch);

}  // namespace pesinlab
