#include "pesinlab/pesin.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

#include "pesinlab/error.hpp"

namespace pesinlab {

void PesinParams::validate() const {
  if (K < 1) throw std::invalid_argument("Pesin parameters: K must be >= 1");
  if (!(zeta > 0.0)) throw std::invalid_argument("Pesin parameters: zeta must be > 0");
  if (k_max < 1) throw std::invalid_argument("Pesin parameters: k_max must be >= 1");
  if (horizon < k_max) throw std::invalid_argument("Pesin parameters: horizon must be >= k_max");
  if (sweep < 10) throw std::invalid_argument("Pesin parameters: sweep must be >= 10");
}

double BlockMargins::worst() const { return std::min({a, b, c}); }

int pesin_window_back(const PesinParams& p) { return (p.horizon + 1) * p.K + p.sweep; }
int pesin_window_forward(const PesinParams& p) { return 2 * p.horizon * p.K + p.sweep; }

BlockAnalysis::BlockAnalysis(const MapSystem& system, OrbitWindow window, const PesinParams& params)
    : params_(params) {
  params_.validate();
  if (window.first > -pesin_window_back(params_) || window.last() < pesin_window_forward(params_))
    throw std::invalid_argument("BlockAnalysis: orbit window too short for the parameters");
  splitting_ = split_along_orbit(system, std::move(window), params_.sweep);

  const int K = params_.K;
  const int H = params_.horizon;
  const double zeta = params_.zeta;
  const auto& st = splitting_.stable_log_stretch;
  const auto& un = splitting_.unstable_log_stretch;
  const int v0 = splitting_.valid_first;
  auto s_at = [&](int t) { return st.at(static_cast<std::size_t>(t - v0)); };
  auto u_at = [&](int t) { return un.at(static_cast<std::size_t>(t - v0)); };

  // (a): running forward sum of log stretches on E from x; (b): running
  // backward sum on F ending at x.
  const int n_max = H * K + K - 1;
  std::vector<double> fwd(static_cast<std::size_t>(n_max) + 1, 0.0);
  std::vector<double> bwd(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int n = 1; n <= n_max; ++n) {
    fwd[static_cast<std::size_t>(n)] = fwd[static_cast<std::size_t>(n - 1)] + s_at(n - 1);
    bwd[static_cast<std::size_t>(n)] = bwd[static_cast<std::size_t>(n - 1)] + u_at(-n);
  }
  std::vector<double> a_at(static_cast<std::size_t>(H));
  std::vector<double> b_at(static_cast<std::size_t>(H));
  for (int l = 1; l <= H; ++l) {
    double wa = std::numeric_limits<double>::infinity();
    double wb = wa;
    for (int r = 0; r < K; ++r) {
      const int n = l * K + r;
      wa = std::min(wa, -zeta - fwd[static_cast<std::size_t>(n)] / n);
      wb = std::min(wb, bwd[static_cast<std::size_t>(n)] / n - zeta);
    }
    a_at[static_cast<std::size_t>(l - 1)] = wa;
    b_at[static_cast<std::size_t>(l - 1)] = wb;
  }
  a_suffix_ = a_at;
  b_suffix_ = b_at;
  for (int i = H - 2; i >= 0; --i) {
    const auto u = static_cast<std::size_t>(i);
    a_suffix_[u] = std::min(a_suffix_[u], a_suffix_[u + 1]);
    b_suffix_[u] = std::min(b_suffix_[u], b_suffix_[u + 1]);
  }

  // (c) over l in [-HK, HK], L = K, 2K, 4K, ... <= HK.
  const int lo = -H * K;
  const int hi = 2 * H * K;
  std::vector<double> gap(static_cast<std::size_t>(hi - lo) + 1, 0.0);
  for (int t = lo; t < hi; ++t)
    gap[static_cast<std::size_t>(t - lo + 1)] = gap[static_cast<std::size_t>(t - lo)] + (s_at(t) - u_at(t));
  margin_c_ = std::numeric_limits<double>::infinity();
  for (long L = K; L <= static_cast<long>(H) * K; L *= 2) {
    for (int l = -H * K; l <= H * K; ++l) {
      const double ratio =
          (gap[static_cast<std::size_t>(l + L - lo)] - gap[static_cast<std::size_t>(l - lo)]) / static_cast<double>(L);
      margin_c_ = std::min(margin_c_, -2.0 * zeta - ratio);
    }
  }
}

BlockMargins BlockAnalysis::margins(int k) const {
  if (k < 1 || k > params_.horizon) throw std::invalid_argument("block level k must lie in [1, horizon]");
  return {a_suffix_[static_cast<std::size_t>(k - 1)], b_suffix_[static_cast<std::size_t>(k - 1)], margin_c_};
}

BlockVerdict BlockAnalysis::verdict() const {
  BlockVerdict v;
  v.point = point();
  for (int k = 1; k <= params_.k_max; ++k) {
    const BlockMargins m = margins(k);
    if (m.worst() >= 0.0) {
      v.k = k;
      v.margins = m;
      return v;
    }
  }
  v.margins = margins(params_.k_max);
  return v;
}

namespace {

OrbitWindow window_by_inverse(const MapSystem& system, const Point& x, const PesinParams& params) {
  params.validate();
  return orbit_window(system, x, pesin_window_back(params), pesin_window_forward(params));
}

}  // namespace

BlockMargins check_block_conditions(const MapSystem& system, const Point& x, const PesinParams& params, int k) {
  return BlockAnalysis(system, window_by_inverse(system, x, params), params).margins(k);
}

BlockVerdict classify_block(const MapSystem& system, const Point& x, const PesinParams& params) {
  return BlockAnalysis(system, window_by_inverse(system, x, params), params).verdict();
}

BlockVerdict classify_block(const MapSystem& system, OrbitWindow window, const PesinParams& params) {
  return BlockAnalysis(system, std::move(window), params).verdict();
}

BlockMeasure estimate_block_measure(const MapSystem& system, const PesinParams& params, int k, const Sampler& sampler,
                                    Execution exec) {
  params.validate();
  if (sampler.count < 100) throw std::invalid_argument("estimate_block_measure: sampler count must be >= 100");
  if (k < 0 || k > params.k_max) throw std::invalid_argument("estimate_block_measure: k must lie in [0, k_max]");
  if (sampler.burn_in < 0) throw std::invalid_argument("estimate_block_measure: burn_in must be >= 0");

  enum class Outcome : unsigned char { classified, escaped, degenerate };
  struct Sample {
    Outcome outcome = Outcome::classified;
    std::optional<int> level;
  };
  const auto box = system.sampling_box();
  const auto samples = map_indices<Sample>(
      static_cast<std::size_t>(sampler.count),
      [&](std::size_t i) {
        std::mt19937_64 rng(task_seed(sampler.seed, i));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double ux = u(rng);
        const double uy = u(rng);
        Point p(box[0](0) + (box[1](0) - box[0](0)) * ux, box[0](1) + (box[1](1) - box[0](1)) * uy);
        p = system.wrap(p);
        Sample s;
        try {
          for (int j = 0; j < sampler.burn_in; ++j) {
            p = system.forward(p);
            if (system.escaped(p)) throw Error(ErrorCode::orbit_escape, "sample escaped during burn-in", j + 1);
          }
          const OrbitWindow w =
              orbit_window_from_history(system, p, pesin_window_back(params), pesin_window_forward(params));
          s.level = BlockAnalysis(system, w, params).verdict().k;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::orbit_escape) {
            s.outcome = Outcome::escaped;
          } else if (e.code() == ErrorCode::degenerate_splitting) {
            s.outcome = Outcome::degenerate;
          } else {
            throw;
          }
        }
        return s;
      },
      exec);

  BlockMeasure out;
  out.by_k.assign(static_cast<std::size_t>(params.k_max), 0.0);
  std::vector<int> at_level(static_cast<std::size_t>(params.k_max) + 1, 0);
  for (const auto& s : samples) {
    out.levels.push_back(s.level);
    if (s.outcome == Outcome::escaped) {
      ++out.escaped;
      continue;
    }
    ++out.classified;
    if (s.outcome == Outcome::degenerate) ++out.degenerate;
    if (s.level) ++at_level[static_cast<std::size_t>(*s.level)];
  }
  if (out.classified > 0) {
    int cumulative = 0;
    for (int j = 1; j <= params.k_max; ++j) {
      cumulative += at_level[static_cast<std::size_t>(j)];
      out.by_k[static_cast<std::size_t>(j - 1)] = static_cast<double>(cumulative) / out.classified;
    }
  }
  out.fraction = k == 0 ? 0.0 : out.by_k[static_cast<std::size_t>(k - 1)];
  return out;
}

bool extended_block_membership(const MapSystem& system, const Point& z, const PesinParams& params, int k,
                               double sigma, const PseudoOrbit& witness) {
  params.validate();
  if (k < 1 || k > params.k_max) throw std::invalid_argument("extended_block_membership: k must lie in [1, k_max]");
  if (!(sigma > 0.0)) throw std::invalid_argument("extended_block_membership: sigma must be > 0");
  if (witness.segments.empty()) throw Error(ErrorCode::witness_invalid, "witness has no segments");

  for (int i = witness.first_index; i <= witness.last_index(); ++i) {
    const Segment& seg = witness.segment(i);
    if (seg.length < 2 * k * params.K)
      throw Error(ErrorCode::witness_invalid, "witness segment shorter than 2kK", i);
    const Point end = seg.trajectory(system).back();
    for (const Point& p : {seg.base, end}) {
      const auto v = classify_block(system, p, params);
      if (!v.k || *v.k > k) throw Error(ErrorCode::witness_invalid, "witness endpoint outside the block", i);
    }
  }

  const long t0 = witness.start_time();
  const long t1 = witness.offset(witness.last_index()) + witness.segment(witness.last_index()).length;
  const OrbitWindow zw = orbit_window(system, z, static_cast<int>(-std::min(t0, 0L)), static_cast<int>(std::max(t1, 0L)));
  for (int i = witness.first_index; i <= witness.last_index(); ++i) {
    const Segment& seg = witness.segment(i);
    const long c = witness.offset(i);
    const auto t = seg.trajectory(system);
    for (int j = 0; j <= seg.length; ++j) {
      if (!(system.distance(zw.at(static_cast<int>(c + j)), t[static_cast<std::size_t>(j)]) < sigma)) return false;
    }
  }
  return true;
}

}  // namespace pesinlab
