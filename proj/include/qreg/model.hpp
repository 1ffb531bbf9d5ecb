#pragma once

#include <cmath>
#include <memory>
#include <optional>

#include "qreg/core.hpp"

namespace qreg {

/// q-order regularized quadratic model of f anchored at x^k:
///   f_k(y) = f(x^k) + <grad, s> + 1/2 <s, H s> + (L/q) |s|^q,  s = y - x^k.
/// Everything that depends only on the anchor is cached, so changing L while
/// backtracking is free.
struct ModelState {
  Vector anchor;
  Vector grad_anchor;
  std::shared_ptr<const HessianOperator> hess;
  std::optional<Matrix> hess_dense;
  double L = 1.0;
  double q = 3.0;
  double F_anchor = 0.0;
  double f_anchor = 0.0;

  Index dim() const { return anchor.size(); }

  ModelState with_L(double new_L) const {
    ModelState m = *this;
    m.L = new_L;
    return m;
  }

  Vector hess_apply(const Vector& v) const {
    if (hess_dense) return *hess_dense * v;
    return hess->apply(v);
  }
};

/// Coefficient c(|s|) with grad of (L/q)|s|^q equal to c * s; the limit
/// |0|^{q-2} * 0 = 0 is used for every q in [2, 3].
inline double regularizer_coeff(double L, double q, double norm_s) {
  if (q == 2.0) return L;
  if (norm_s == 0.0) return 0.0;
  return L * std::pow(norm_s, q - 2.0);
}

inline ModelState build_model(const CompositeProblem& problem, const Vector& x_k, double L,
                              double q, Index dense_cap = 2000) {
  if (!(L > 0.0)) throw DataError("build_model: L must be positive");
  const double gx = problem.g->value(x_k);
  if (gx == kInf) throw InvariantViolation("build_model: anchor outside dom g");
  ModelState m;
  m.anchor = x_k;
  m.f_anchor = problem.f->value(x_k);
  m.grad_anchor = problem.f->gradient(x_k);
  if (!std::isfinite(m.f_anchor) || !m.grad_anchor.allFinite()) {
    throw NumericalError("build_model: non-finite f or gradient at the anchor");
  }
  m.F_anchor = m.f_anchor + gx;
  m.hess = problem.f->hessian(x_k);
  if (problem.dim() <= dense_cap) m.hess_dense = m.hess->dense();
  m.L = L;
  m.q = q;
  return m;
}

/// Value from a displacement s = y - x^k and its product H s.
inline double model_value_at(const ModelState& m, const Vector& s, const Vector& Hs) {
  const double ns = s.norm();
  return m.f_anchor + m.grad_anchor.dot(s) + 0.5 * s.dot(Hs) + (m.L / m.q) * std::pow(ns, m.q);
}

inline Vector model_grad_at(const ModelState& m, const Vector& s, const Vector& Hs) {
  return m.grad_anchor + Hs + regularizer_coeff(m.L, m.q, s.norm()) * s;
}

inline double model_value(const ModelState& m, const Vector& y) {
  const Vector s = y - m.anchor;
  return model_value_at(m, s, m.hess_apply(s));
}

inline Vector model_grad(const ModelState& m, const Vector& y) {
  const Vector s = y - m.anchor;
  return model_grad_at(m, s, m.hess_apply(s));
}

/// Theta_k(y) = f_k(y) + g(y); +inf outside dom g.
inline double subproblem_objective(const ModelState& m, const ProxFriendly& g, const Vector& y) {
  const double gy = g.value(y);
  if (gy == kInf) return kInf;
  return model_value(m, y) + gy;
}

struct Residual {
  Vector vec;
  double norm = 0.0;
};

/// R(x) = x - prox_g(x - grad f(x)), r(x) = |R(x)|.
inline Residual outer_residual(const CompositeProblem& problem, const Vector& x) {
  Residual r;
  r.vec = x - problem.g->prox(x - problem.f->gradient(x), 1.0);
  r.norm = r.vec.norm();
  return r;
}

/// R_k(y) = y - prox_g(y - grad f_k(y)).
inline Residual subproblem_residual(const ModelState& m, const ProxFriendly& g, const Vector& y) {
  Residual r;
  r.vec = y - g.prox(y - model_grad(m, y), 1.0);
  r.norm = r.vec.norm();
  return r;
}

}  // namespace qreg
