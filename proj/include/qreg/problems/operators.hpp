#pragma once

#include <memory>

#include <Eigen/SparseCore>

#include "qreg/core.hpp"

namespace qreg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Linear map A : R^cols -> R^rows with its adjoint.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector adjoint(const Vector& y) const = 0;
  /// Columns idx of A as a dense rows() x |idx| block.
  virtual Matrix columns(const std::vector<Index>& idx) const {
    Matrix out(rows(), static_cast<Index>(idx.size()));
    Vector e = Vector::Zero(cols());
    for (std::size_t c = 0; c < idx.size(); ++c) {
      e[idx[c]] = 1.0;
      out.col(static_cast<Index>(c)) = apply(e);
      e[idx[c]] = 0.0;
    }
    return out;
  }
};

template <typename Mat>
class MatrixOperator final : public LinearOperator {
 public:
  explicit MatrixOperator(Mat a) : a_(std::move(a)) {}
  Index rows() const override { return a_.rows(); }
  Index cols() const override { return a_.cols(); }
  Vector apply(const Vector& x) const override { return a_ * x; }
  Vector adjoint(const Vector& y) const override { return a_.transpose() * y; }
  const Mat& matrix() const { return a_; }

 private:
  Mat a_;
};

using DenseOperator = MatrixOperator<Matrix>;
using SparseOperator = MatrixOperator<SparseMatrix>;

}  // namespace qreg
