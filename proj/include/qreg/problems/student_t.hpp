#pragma once

#include <cmath>
#include <memory>

#include "qreg/core.hpp"
#include "qreg/problems/logistic.hpp"
#include "qreg/problems/operators.hpp"
#include "qreg/prox.hpp"

namespace qreg {

/// psi(Ax - b) with psi(u) = sum log(1 + u_i^2 / nu). Nonconvex: psi'' < 0
/// once |u_i| > sqrt(nu).
class StudentTLoss final : public SmoothOracle {
 public:
  StudentTLoss(std::shared_ptr<const LinearOperator> a, Vector b, double nu)
      : a_(std::move(a)), b_(std::move(b)), nu_(nu) {
    if (!a_) throw DataError("student_t: missing operator");
    if (b_.size() != a_->rows()) throw DataError("student_t: observation count does not match rows");
    if (!(nu_ > 0.0)) throw DataError("student_t: nu must be positive");
  }

  Index dim() const override { return a_->cols(); }
  double nu() const { return nu_; }
  const LinearOperator& op() const { return *a_; }
  const Vector& observations() const { return b_; }

  static double psi(double u, double nu) { return std::log1p(u * u / nu); }
  static double dpsi(double u, double nu) { return 2.0 * u / (nu + u * u); }
  static double d2psi(double u, double nu) {
    const double den = nu + u * u;
    return 2.0 * (nu - u * u) / (den * den);
  }

  double value(const Vector& x) const override {
    const Vector u = a_->apply(x) - b_;
    double s = 0.0;
    for (Index i = 0; i < u.size(); ++i) s += psi(u[i], nu_);
    return s;
  }

  Vector gradient(const Vector& x) const override {
    const Vector u = a_->apply(x) - b_;
    return a_->adjoint(u.unaryExpr([this](double ui) { return dpsi(ui, nu_); }));
  }

  std::shared_ptr<const HessianOperator> hessian(const Vector& x) const override {
    const Vector u = a_->apply(x) - b_;
    return std::make_shared<detail::GramHessian>(
        a_, u.unaryExpr([this](double ui) { return d2psi(ui, nu_); }).eval());
  }

 private:
  std::shared_ptr<const LinearOperator> a_;
  Vector b_;
  double nu_;
};

inline CompositeProblem student_t_oracle(std::shared_ptr<const LinearOperator> a, const Vector& b,
                                         double nu, double lambda,
                                         std::string name = "student_t") {
  auto f = std::make_shared<StudentTLoss>(std::move(a), b, nu);
  auto g = std::make_shared<L1Norm>(f->dim(), lambda);
  return CompositeProblem(std::move(f), std::move(g), std::move(name));
}

}  // namespace qreg
