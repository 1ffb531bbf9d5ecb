#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qreg/problems/operators.hpp"

namespace qreg {

/// Entry (k, j) of the orthonormal DCT-II matrix of size n.
inline double dct_entry(Index n, Index k, Index j) {
  const double scale = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                              : std::sqrt(2.0 / static_cast<double>(n));
  // Reduce (2j+1)k modulo 4n before scaling so the cosine argument stays small.
  const std::int64_t num = ((2 * static_cast<std::int64_t>(j) + 1) * static_cast<std::int64_t>(k)) %
                           (4 * static_cast<std::int64_t>(n));
  return scale * std::cos(M_PI * static_cast<double>(num) / (2.0 * static_cast<double>(n)));
}

/// Selected rows J of the orthonormal DCT-II applied to x, by direct summation.
inline Vector dct_apply(const Vector& x, const std::vector<Index>& rows) {
  const Index n = x.size();
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double s = 0.0;
    for (Index j = 0; j < n; ++j) s += dct_entry(n, rows[r], j) * x[j];
    out[static_cast<Index>(r)] = s;
  }
  return out;
}

/// Adjoint of dct_apply: sum over selected rows of y_r times DCT row J_r.
inline Vector dct_adjoint(const Vector& y, const std::vector<Index>& rows, Index n) {
  Vector out = Vector::Zero(n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double yr = y[static_cast<Index>(r)];
    for (Index j = 0; j < n; ++j) out[j] += dct_entry(n, rows[r], j) * yr;
  }
  return out;
}

/// "Random cosine measurements": A x = (dct(x))_J. The |J| x n block of the
/// DCT matrix is formed once when it fits under `materialize_cap` entries,
/// otherwise rows are summed on the fly.
class PartialDct final : public LinearOperator {
 public:
  PartialDct(Index n, std::vector<Index> rows, Index materialize_cap = Index{1} << 24)
      : n_(n), rows_(std::move(rows)) {
    for (Index r : rows_) {
      if (r < 0 || r >= n_) throw DataError("PartialDct: row index out of range");
    }
    if (static_cast<Index>(rows_.size()) * n_ <= materialize_cap) {
      block_.resize(static_cast<Index>(rows_.size()), n_);
      for (std::size_t r = 0; r < rows_.size(); ++r)
        for (Index j = 0; j < n_; ++j) block_(static_cast<Index>(r), j) = dct_entry(n_, rows_[r], j);
    }
  }

  Index rows() const override { return static_cast<Index>(rows_.size()); }
  Index cols() const override { return n_; }
  const std::vector<Index>& row_indices() const { return rows_; }

  Vector apply(const Vector& x) const override {
    if (block_.size() > 0) return block_ * x;
    return dct_apply(x, rows_);
  }
  Vector adjoint(const Vector& y) const override {
    if (block_.size() > 0) return block_.transpose() * y;
    return dct_adjoint(y, rows_, n_);
  }
  Matrix columns(const std::vector<Index>& idx) const override {
    Matrix out(rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
      for (std::size_t r = 0; r < rows_.size(); ++r) {
        out(static_cast<Index>(r), static_cast<Index>(c)) =
            block_.size() > 0 ? block_(static_cast<Index>(r), idx[c]) : dct_entry(n_, rows_[r], idx[c]);
      }
    }
    return out;
  }

 private:
  Index n_;
  std::vector<Index> rows_;
  Matrix block_;
};

}  // namespace qreg
