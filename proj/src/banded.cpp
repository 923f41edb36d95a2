#include "pesinlab/banded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "pesinlab/error.hpp"

namespace pesinlab {

BandedMatrix::BandedMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), kv_(kl + ku), rows_(2 * kl + ku + 1) {
  if (n < 1 || kl < 0 || ku < 0) throw std::invalid_argument("BandedMatrix: bad shape");
  data_.assign(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(n), 0.0);
}

double& BandedMatrix::at(int i, int j) {
  if (i < 0 || j < 0 || i >= n_ || j >= n_ || i - j > kl_ || j - i > ku_)
    throw std::out_of_range("BandedMatrix: entry outside the band");
  return ab(kv_ + i - j, j);
}

double BandedMatrix::at(int i, int j) const {
  if (i - j > kl_ || j - i > ku_) return 0.0;
  return ab(kv_ + i - j, j);
}

void BandedMatrix::factor(double pivot_floor) {
  pivots_.assign(static_cast<std::size_t>(n_), 0);
  smallest_pivot_ = std::numeric_limits<double>::infinity();
  int ju = 0;
  for (int j = 0; j < n_; ++j) {
    const int km = std::min(kl_, n_ - 1 - j);
    int jp = 0;
    double best = std::abs(ab(kv_, j));
    for (int i = 1; i <= km; ++i) {
      if (std::abs(ab(kv_ + i, j)) > best) {
        best = std::abs(ab(kv_ + i, j));
        jp = i;
      }
    }
    pivots_[static_cast<std::size_t>(j)] = j + jp;
    smallest_pivot_ = std::min(smallest_pivot_, best);
    if (!(best >= pivot_floor)) throw Error(ErrorCode::ill_conditioned, "banded solve hit a vanishing pivot", j);
    ju = std::max(ju, std::min(j + ku_ + jp, n_ - 1));
    if (jp != 0) {
      for (int c = j; c <= ju; ++c) std::swap(ab(kv_ + jp - (c - j), c), ab(kv_ - (c - j), c));
    }
    const double pivot = ab(kv_, j);
    for (int i = 1; i <= km; ++i) ab(kv_ + i, j) /= pivot;
    for (int c = j + 1; c <= ju; ++c) {
      const double u = ab(kv_ - (c - j), c);
      if (u == 0.0) continue;
      for (int i = 1; i <= km; ++i) ab(kv_ + i - (c - j), c) -= ab(kv_ + i, j) * u;
    }
  }
  factored_ = true;
}

void BandedMatrix::solve(std::vector<double>& b) const {
  if (!factored_) throw std::logic_error("BandedMatrix::solve before factor");
  if (static_cast<int>(b.size()) != n_) throw std::invalid_argument("BandedMatrix::solve: size mismatch");
  for (int j = 0; j < n_ - 1; ++j) {
    const int l = pivots_[static_cast<std::size_t>(j)];
    if (l != j) std::swap(b[static_cast<std::size_t>(l)], b[static_cast<std::size_t>(j)]);
    const int lm = std::min(kl_, n_ - 1 - j);
    for (int i = 1; i <= lm; ++i) b[static_cast<std::size_t>(j + i)] -= ab(kv_ + i, j) * b[static_cast<std::size_t>(j)];
  }
  for (int j = n_ - 1; j >= 0; --j) {
    b[static_cast<std::size_t>(j)] /= ab(kv_, j);
    const double bj = b[static_cast<std::size_t>(j)];
    for (int i = std::max(0, j - kv_); i < j; ++i) b[static_cast<std::size_t>(i)] -= ab(kv_ + i - j, j) * bj;
  }
}

}  // namespace pesinlab
