#pragma once

// General banded matrix with LU factorisation by partial pivoting, stored
// column-major in the LAPACK band layout (kl extra rows for pivot fill-in).

#include <vector>

namespace pesinlab {

class BandedMatrix {
 public:
  BandedMatrix(int n, int kl, int ku);

  int size() const { return n_; }
  /// Entry (i, j); |i - j| must lie inside the band.
  double& at(int i, int j);
  double at(int i, int j) const;

  /// In-place LU. Throws IllConditioned when a pivot falls below `pivot_floor`
  /// in absolute value; the index is the elimination step.
  void factor(double pivot_floor = 1e-14);
  /// Solves A x = b in place after factor().
  void solve(std::vector<double>& b) const;
  double smallest_pivot() const { return smallest_pivot_; }

 private:
  double& ab(int r, int c) { return data_[static_cast<std::size_t>(c) * rows_ + static_cast<std::size_t>(r)]; }
  double ab(int r, int c) const { return data_[static_cast<std::size_t>(c) * rows_ + static_cast<std::size_t>(r)]; }

  int n_;
  int kl_;
  int ku_;
  int kv_;
  int rows_;
  std::vector<double> data_;
  std::vector<int> pivots_;
  double smallest_pivot_ = 0.0;
  bool factored_ = false;
};

}  // namespace pesinlab
