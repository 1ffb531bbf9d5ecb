#pragma once

#include <cmath>
#include <memory>

#include "qreg/core.hpp"
#include "qreg/problems/operators.hpp"
#include "qreg/prox.hpp"

namespace qreg {

namespace detail {

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

/// 1 / (1 + exp(z)) without overflow.
inline double logistic_tail(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

/// A^T diag(w) A.
class GramHessian final : public HessianOperator {
 public:
  GramHessian(std::shared_ptr<const LinearOperator> a, Vector w) : a_(std::move(a)), w_(std::move(w)) {}
  Vector apply(const Vector& v) const override {
    return a_->adjoint(w_.cwiseProduct(a_->apply(v)));
  }
  const Vector& weights() const { return w_; }

 private:
  std::shared_ptr<const LinearOperator> a_;
  Vector w_;
};

}  // namespace detail

/// psi(Ax) with psi(u) = (1/m) sum log(1 + exp(-b_i u_i)).
class LogisticLoss final : public SmoothOracle {
 public:
  LogisticLoss(std::shared_ptr<const LinearOperator> a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    if (!a_ || a_->rows() < 1 || a_->cols() < 1) throw DataError("logistic: empty design");
    if (b_.size() != a_->rows()) throw DataError("logistic: label count does not match rows");
    for (Index i = 0; i < b_.size(); ++i) {
      if (b_[i] != 1.0 && b_[i] != -1.0) {
        throw DataError("logistic: label " + std::to_string(b_[i]) + " at row " +
                        std::to_string(i) + " is not in {-1, +1}");
      }
    }
  }

  Index dim() const override { return a_->cols(); }
  Index samples() const { return a_->rows(); }

  double value(const Vector& x) const override {
    const Vector u = a_->apply(x);
    double s = 0.0;
    for (Index i = 0; i < u.size(); ++i) s += detail::softplus(-b_[i] * u[i]);
    return s / static_cast<double>(samples());
  }

  Vector gradient(const Vector& x) const override {
    const Vector u = a_->apply(x);
    Vector w(u.size());
    for (Index i = 0; i < u.size(); ++i) w[i] = -b_[i] * detail::logistic_tail(b_[i] * u[i]);
    return a_->adjoint(w) / static_cast<double>(samples());
  }

  std::shared_ptr<const HessianOperator> hessian(const Vector& x) const override {
    const Vector u = a_->apply(x);
    Vector w(u.size());
    for (Index i = 0; i < u.size(); ++i) {
      const double s = detail::logistic_tail(b_[i] * u[i]);
      w[i] = s * (1.0 - s) / static_cast<double>(samples());
    }
    return std::make_shared<detail::GramHessian>(a_, std::move(w));
  }

 private:
  std::shared_ptr<const LinearOperator> a_;
  Vector b_;
};

inline CompositeProblem logistic_oracle(std::shared_ptr<const LinearOperator> a, const Vector& b,
                                        double lambda, std::string name = "logistic") {
  auto f = std::make_shared<LogisticLoss>(std::move(a), b);
  auto g = std::make_shared<L1Norm>(f->dim(), lambda);
  return CompositeProblem(std::move(f), std::move(g), std::move(name));
}

inline CompositeProblem logistic_oracle(const Matrix& a, const Vector& b, double lambda) {
  return logistic_oracle(std::make_shared<DenseOperator>(a), b, lambda);
}

inline CompositeProblem logistic_oracle(const SparseMatrix& a, const Vector& b, double lambda) {
  return logistic_oracle(std::make_shared<SparseOperator>(a), b, lambda);
}

}  // namespace qreg
