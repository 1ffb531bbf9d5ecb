#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "qreg/core.hpp"

namespace qreg {

/// Componentwise sign(z_i) * max(|z_i| - alpha*lambda, 0).
inline Vector prox_l1(const Vector& z, double alpha, double lambda) {
  const double t = alpha * lambda;
  return z.unaryExpr([t](double zi) {
    const double a = std::abs(zi) - t;
    return a > 0.0 ? std::copysign(a, zi) : 0.0;
  });
}

/// Euclidean projection onto {x >= 0, sum x = 1} by the sorted-threshold rule.
inline Vector project_simplex(const Vector& z) {
  const Index n = z.size();
  if (n < 1) throw DataError("project_simplex: empty vector");
  std::vector<double> u(z.data(), z.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < n; ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return (z.array() - theta).max(0.0).matrix();
}

class L1Norm final : public ProxFriendly {
 public:
  L1Norm(Index dim, double lambda) : dim_(dim), lambda_(lambda) {
    if (dim < 1) throw DataError("L1Norm: dimension must be positive");
    if (!(lambda > 0.0)) throw DataError("L1Norm: lambda must be positive");
  }

  Index dim() const override { return dim_; }
  double lambda() const { return lambda_; }
  double value(const Vector& x) const override { return lambda_ * x.lpNorm<1>(); }
  Vector prox(const Vector& z, double alpha) const override { return prox_l1(z, alpha, lambda_); }
  bool domain_member(const Vector& x) const override { return x.allFinite(); }

 private:
  Index dim_;
  double lambda_;
};

class SimplexIndicator final : public ProxFriendly {
 public:
  static constexpr double kTolerance = 1e-12;

  explicit SimplexIndicator(Index dim) : dim_(dim) {
    if (dim < 1) throw DataError("SimplexIndicator: dimension must be positive");
  }

  Index dim() const override { return dim_; }
  double value(const Vector& x) const override { return domain_member(x) ? 0.0 : kInf; }
  Vector prox(const Vector& z, double /*alpha*/) const override { return project_simplex(z); }
  bool domain_member(const Vector& x) const override {
    return x.size() == dim_ && x.allFinite() && x.minCoeff() >= -kTolerance &&
           std::abs(x.sum() - 1.0) <= kTolerance;
  }

 private:
  Index dim_;
};

/// g == 0.
class ZeroFunction final : public ProxFriendly {
 public:
  explicit ZeroFunction(Index dim) : dim_(dim) {}
  Index dim() const override { return dim_; }
  double value(const Vector&) const override { return 0.0; }
  Vector prox(const Vector& z, double) const override { return z; }
  bool domain_member(const Vector& x) const override { return x.allFinite(); }

 private:
  Index dim_;
};

/// Generic separable g(x) = sum_i h(x_i) built from a scalar value and a
/// scalar prox(z, alpha).
class SeparableProx final : public ProxFriendly {
 public:
  using ScalarValue = std::function<double(double)>;
  using ScalarProx = std::function<double(double, double)>;

  SeparableProx(Index dim, ScalarValue value, ScalarProx prox)
      : dim_(dim), value_(std::move(value)), prox_(std::move(prox)) {}

  Index dim() const override { return dim_; }
  double value(const Vector& x) const override {
    double s = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      const double v = value_(x[i]);
      if (v == kInf) return kInf;
      s += v;
    }
    return s;
  }
  Vector prox(const Vector& z, double alpha) const override {
    return z.unaryExpr([&](double zi) { return prox_(zi, alpha); });
  }
  bool domain_member(const Vector& x) const override { return value(x) < kInf; }

 private:
  Index dim_;
  ScalarValue value_;
  ScalarProx prox_;
};

/// e_{alpha g}(z) = g(p) + |p - z|^2 / (2 alpha), p = prox_{alpha g}(z).
inline double moreau_envelope(const ProxFriendly& g, double alpha, const Vector& z) {
  if (!(alpha > 0.0)) throw DataError("moreau_envelope: alpha must be positive");
  const Vector p = g.prox(z, alpha);
  return g.value(p) + (p - z).squaredNorm() / (2.0 * alpha);
}

}  // namespace qreg
