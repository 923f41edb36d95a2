#include "pesinlab/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pesinlab/error.hpp"

namespace pesinlab {

namespace {

const Vec2& generic_vector() {
  static const Vec2 v = Vec2(0.7313537016191705, 0.6819983600624985).normalized();
  return v;
}

Vec2 perp(const Vec2& v) { return Vec2(-v(1), v(0)); }

Point step_checked(const MapSystem& system, const Point& x, long index) {
  Point y = system.forward(x);
  if (system.escaped(y)) throw Error(ErrorCode::orbit_escape, "orbit diverged", index);
  return y;
}

Basis orthonormalize(const Basis& b) {
  if (b.cols() < 1 || b.cols() > 2) throw Error(ErrorCode::rank_deficient, "subspace must have 1 or 2 columns");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-12 * std::max(1.0, s(0))))
    throw Error(ErrorCode::rank_deficient, "subspace basis is rank deficient");
  return svd.matrixU();
}

}  // namespace

void CocycleProduct::push(const Mat2& jacobian) {
  const Mat2 m = jacobian * q_;
  const Vec2 m1 = m.col(0);
  const double r11 = m1.norm();
  if (!(r11 > 0.0)) throw Error(ErrorCode::rank_deficient, "cocycle lost rank", length());
  QrFactor step;
  const Vec2 q1 = m1 / r11;
  const Vec2 q2 = perp(q1);
  step.q.col(0) = q1;
  step.q.col(1) = q2;
  step.r << r11, q1.dot(m.col(1)), 0.0, q2.dot(m.col(1));
  factors_.push_back(step);
  q_ = step.q;

  r_hat_ = step.r * r_hat_;
  const double s = r_hat_.cwiseAbs().maxCoeff();
  r_hat_ /= s;
  log_scale_ += std::log(s);
  log_abs_det_ += std::log(r11) + std::log(std::abs(step.r(1, 1)));
}

Mat2 CocycleProduct::evaluate() const { return q_ * r_hat_ * std::exp(log_scale_); }

std::array<double, 2> CocycleProduct::log_singular_values() const {
  Eigen::JacobiSVD<Mat2> svd(r_hat_);
  const double top = log_scale_ + std::log(svd.singularValues()(0));
  return {top, log_abs_det_ - top};
}

CocycleProduct cocycle_product(const MapSystem& system, const Point& x, int n) {
  if (n < 1) throw std::invalid_argument("cocycle_product: n must be >= 1");
  CocycleProduct product;
  Point p = system.wrap(x);
  for (int k = 0; k < n; ++k) {
    product.push(system.jacobian(p));
    if (k + 1 < n) p = step_checked(system, p, k + 1);
  }
  return product;
}

LyapunovSpectrum finite_time_exponents(const MapSystem& system, const Point& x, int n, double gap) {
  if (n < 10) throw std::invalid_argument("finite_time_exponents: n must be >= 10");
  const auto logs = cocycle_product(system, x, n).log_singular_values();
  LyapunovSpectrum spectrum;
  spectrum.horizon = n;
  spectrum.exponents = {logs[1] / n, logs[0] / n};
  std::sort(spectrum.exponents.begin(), spectrum.exponents.end());
  int run = 1;
  for (std::size_t i = 1; i < spectrum.exponents.size(); ++i) {
    if (spectrum.exponents[i] - spectrum.exponents[i - 1] < gap) {
      ++run;
    } else {
      spectrum.multiplicities.push_back(run);
      run = 1;
    }
  }
  spectrum.multiplicities.push_back(run);
  return spectrum;
}

double line_distance(const Vec2& u, const Vec2& v) {
  const double c = std::abs(u.dot(v));
  const double s = std::abs(u(0) * v(1) - u(1) * v(0));
  return std::atan2(s, c);
}

double grassmann_distance(const Basis& a, const Basis& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("grassmann_distance: dimension mismatch");
  if (a.cols() == 2) return 0.0;
  return line_distance(a.col(0), b.col(0));
}

SplittingEstimate estimate_splitting(const MapSystem& system, const Point& x, int m) {
  if (m < 10) throw std::invalid_argument("estimate_splitting: m must be >= 10");
  const OrbitWindow w = orbit_window(system, x, m, m);

  auto unstable_from = [&](int k) {
    Vec2 v = generic_vector();
    for (int t = -k; t < 0; ++t) v = (system.jacobian(w.at(t)) * v).normalized();
    return v;
  };
  auto stable_from = [&](int k) {
    Vec2 v = generic_vector();
    for (int t = k; t > 0; --t) v = system.jacobian(w.at(t - 1)).lu().solve(v).normalized();
    return v;
  };

  const int first = m - 6;
  std::vector<Vec2> u, s;
  for (int k = first; k <= m; ++k) {
    u.push_back(unstable_from(k));
    s.push_back(stable_from(k));
  }
  std::vector<double> residual;
  for (std::size_t i = 1; i < u.size(); ++i)
    residual.push_back(std::max(line_distance(u[i], u[i - 1]), line_distance(s[i], s[i - 1])));

  SplittingEstimate est;
  est.point = system.wrap(x);
  est.stable_basis = s.back();
  est.unstable_basis = u.back();
  est.forward_horizon = m;
  est.backward_horizon = m;
  est.residual = residual.back();
  if (est.residual > 1e-10 && est.residual >= residual.front())
    throw Error(ErrorCode::degenerate_splitting, "splitting residual not decreasing", 0);
  if (line_distance(s.back(), u.back()) < 1e-10)
    throw Error(ErrorCode::degenerate_splitting, "stable and unstable bundles coincide", 0);
  return est;
}

OrbitSplitting split_along_orbit(const MapSystem& system, OrbitWindow window, int m) {
  OrbitSplitting out;
  out.valid_first = window.first + m;
  out.valid_last = window.last() - m;
  if (out.valid_last < out.valid_first) throw std::invalid_argument("split_along_orbit: window shorter than 2m");
  const auto count = static_cast<std::size_t>(out.valid_last - out.valid_first + 1);
  out.stable.resize(count);
  out.unstable.resize(count);

  std::vector<Mat2> jac(window.points.size());
  for (std::size_t i = 0; i < jac.size(); ++i) jac[i] = system.jacobian(window.points[i]);
  auto jac_at = [&](int t) -> const Mat2& { return jac[static_cast<std::size_t>(t - window.first)]; };

  Vec2 v = generic_vector();
  for (int t = window.first; t < out.valid_last; ++t) {
    v = (jac_at(t) * v).normalized();
    if (t + 1 >= out.valid_first) out.unstable[static_cast<std::size_t>(t + 1 - out.valid_first)] = v;
  }
  v = generic_vector();
  for (int t = window.last(); t > out.valid_first; --t) {
    v = jac_at(t - 1).lu().solve(v).normalized();
    if (t - 1 <= out.valid_last) out.stable[static_cast<std::size_t>(t - 1 - out.valid_first)] = v;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (line_distance(out.stable[i], out.unstable[i]) < 1e-10)
      throw Error(ErrorCode::degenerate_splitting, "stable and unstable bundles coincide",
                  out.valid_first + static_cast<long>(i));
  }
  out.stable_log_stretch.resize(count - 1);
  out.unstable_log_stretch.resize(count - 1);
  for (int t = out.valid_first; t < out.valid_last; ++t) {
    const auto i = static_cast<std::size_t>(t - out.valid_first);
    out.stable_log_stretch[i] = std::log((jac_at(t) * out.stable[i]).norm());
    out.unstable_log_stretch[i] = std::log((jac_at(t) * out.unstable[i]).norm());
  }
  out.orbit = std::move(window);
  return out;
}

std::vector<double> restricted_log_singular_values(const MapSystem& system, const Point& x, int n,
                                                   const Basis& subspace) {
  if (n < 1) throw std::invalid_argument("restricted norms need n >= 1");
  const Basis b = orthonormalize(subspace);
  Point p = system.wrap(x);
  if (b.cols() == 1) {
    Vec2 v = b.col(0);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      v = system.jacobian(p) * v;
      const double len = v.norm();
      if (!(len > 1e-300)) throw Error(ErrorCode::rank_deficient, "pushed subspace collapsed", k);
      acc += std::log(len);
      v /= len;
      if (k + 1 < n) p = step_checked(system, p, k + 1);
    }
    return {acc};
  }
  CocycleProduct product;
  const Mat2 basis = b;
  for (int k = 0; k < n; ++k) {
    product.push(k == 0 ? Mat2(system.jacobian(p) * basis) : system.jacobian(p));
    if (k + 1 < n) p = step_checked(system, p, k + 1);
  }
  const auto logs = product.log_singular_values();
  if (!std::isfinite(logs[1])) throw Error(ErrorCode::rank_deficient, "pushed subspace collapsed", n);
  return {logs[0], logs[1]};
}

double restricted_norm(const MapSystem& system, const Point& x, int n, const Basis& subspace) {
  return restricted_log_singular_values(system, x, n, subspace).front();
}

double restricted_conorm(const MapSystem& system, const Point& x, int n, const Basis& subspace) {
  return restricted_log_singular_values(system, x, n, subspace).back();
}

std::vector<Vec2> stable_bundle_along(const MapSystem& system, const Point& x, int n, int m) {
  const OrbitWindow w = orbit_window_from_history(system, x, 0, n + m);
  std::vector<Vec2> out(static_cast<std::size_t>(n) + 1);
  Vec2 v = generic_vector();
  for (int t = n + m; t > 0; --t) {
    v = system.jacobian(w.at(t - 1)).lu().solve(v).normalized();
    if (t - 1 <= n) out[static_cast<std::size_t>(t - 1)] = v;
  }
  return out;
}

double domination_margin(const MapSystem& system, const Point& x, const Basis& e, const Basis& f, int s_min,
                         int s_max) {
  if (s_min < 1 || s_max < s_min) throw std::invalid_argument("domination_margin: need 1 <= S_min <= S_max");
  const Basis be = orthonormalize(e);
  const Basis bf = orthonormalize(f);
  if (be.cols() != 1 || bf.cols() != 1)
    throw std::invalid_argument("domination_margin: E and F must be complementary lines");
  if (line_distance(be.col(0), bf.col(0)) < 1e-12)
    throw Error(ErrorCode::rank_deficient, "E and F are not complementary");

  // A line matching the contracting bundle is carried by the backward sweep;
  // any other line is pushed forward, which is stable for it.
  const auto stable = stable_bundle_along(system, x, s_max, 30);
  const bool e_stable = line_distance(be.col(0), stable[0]) < 1e-6;
  const bool f_stable = line_distance(bf.col(0), stable[0]) < 1e-6;

  Vec2 ve = be.col(0);
  Vec2 vf = bf.col(0);
  double le = 0.0;
  double lf = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  Point p = system.wrap(x);
  for (int s = 1; s <= s_max; ++s) {
    const Mat2 j = system.jacobian(p);
    const auto t = static_cast<std::size_t>(s - 1);
    ve = j * (e_stable ? stable[t] : ve);
    vf = j * (f_stable ? stable[t] : vf);
    le += std::log(ve.norm());
    lf += std::log(vf.norm());
    ve.normalize();
    vf.normalize();
    if (s >= s_min) margin = std::min(margin, -(le - lf) / s);
    if (s < s_max) p = step_checked(system, p, s);
  }
  return margin;
}

double birkhoff_block_average(const MapSystem& system, const Point& x, int block, int count,
                              BundleSelector selector, int m) {
  if (block < 1 || count < 1) throw std::invalid_argument("birkhoff_block_average: K, l must be >= 1");
  double total = 0.0;
  Point p = system.wrap(x);
  for (int j = 0; j < count; ++j) {
    if (selector == BundleSelector::unstable) {
      const SplittingEstimate est = estimate_splitting(system, p, m);
      total += restricted_conorm(system, p, block, est.unstable_basis);
    } else {
      // Pushing E^s forward amplifies rounding like the unstable rate; the
      // block norm is the product of per-step stretches of the swept bundle.
      const auto bundle = stable_bundle_along(system, p, block, m);
      Point q = p;
      for (int k = 0; k < block; ++k) {
        total += std::log((system.jacobian(q) * bundle[static_cast<std::size_t>(k)]).norm());
        q = system.forward(q);
      }
    }
    for (int k = 0; k < block; ++k) p = step_checked(system, p, static_cast<long>(j) * block + k + 1);
  }
  return total / (static_cast<double>(count) * block);
}

}  // namespace pesinlab
