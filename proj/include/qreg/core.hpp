#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::string field)
      : Error("invalid configuration field: " + field), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class NotCheckable : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Extended reals (-inf is never produced; +inf marks points outside dom g)

class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : infinite_(v == kInf), value_(v == kInf ? 0.0 : v) {}  // NOLINT

  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_finite() const noexcept { return !infinite_; }
  /// Finite value, or +inf as a double.
  constexpr double value() const noexcept { return infinite_ ? kInf : value_; }

  friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) noexcept {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  friend constexpr std::partial_ordering operator<=>(const ExtendedReal& a,
                                                     const ExtendedReal& b) noexcept {
    if (a.infinite_ || b.infinite_) {
      if (a.infinite_ && b.infinite_) return std::partial_ordering::equivalent;
      return a.infinite_ ? std::partial_ordering::greater : std::partial_ordering::less;
    }
    return a.value_ <=> b.value_;
  }

 private:
  bool infinite_ = false;
  double value_ = 0.0;
};

// ---------------------------------------------------------------------------
// Oracles

/// Hessian of f frozen at one point. Implementations cache whatever the
/// point-dependent part is (diagonal weights, dense matrix) so repeated
/// products are cheap.
class HessianOperator {
 public:
  virtual ~HessianOperator() = default;
  virtual Vector apply(const Vector& v) const = 0;
  /// Dense materialization when the problem offers one.
  virtual std::optional<Matrix> dense() const { return std::nullopt; }
};

class DenseHessian final : public HessianOperator {
 public:
  explicit DenseHessian(Matrix h) : h_(std::move(h)) {}
  Vector apply(const Vector& v) const override { return h_ * v; }
  std::optional<Matrix> dense() const override { return h_; }

 private:
  Matrix h_;
};

/// Twice continuously differentiable f.
class SmoothOracle {
 public:
  virtual ~SmoothOracle() = default;
  virtual Index dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual std::shared_ptr<const HessianOperator> hessian(const Vector& x) const = 0;

  Vector hess_vec(const Vector& x, const Vector& v) const { return hessian(x)->apply(v); }
  std::optional<Matrix> hess_dense(const Vector& x) const { return hessian(x)->dense(); }
};

/// Closed proper convex g with an inexpensive proximal mapping.
class ProxFriendly {
 public:
  virtual ~ProxFriendly() = default;
  virtual Index dim() const = 0;
  /// +inf outside dom g.
  virtual double value(const Vector& x) const = 0;
  /// argmin_u { g(u) + |u - z|^2 / (2 alpha) }, alpha > 0.
  virtual Vector prox(const Vector& z, double alpha) const = 0;
  virtual bool domain_member(const Vector& x) const = 0;
};

struct CompositeProblem {
  CompositeProblem(std::shared_ptr<const SmoothOracle> f_, std::shared_ptr<const ProxFriendly> g_,
                   std::string name_ = {})
      : f(std::move(f_)), g(std::move(g_)), name(std::move(name_)) {
    if (!f || !g) throw DataError("composite problem needs both f and g");
    if (f->dim() != g->dim()) {
      throw DataError("dimension mismatch: f has " + std::to_string(f->dim()) + ", g has " +
                      std::to_string(g->dim()));
    }
  }

  Index dim() const { return f->dim(); }

  std::shared_ptr<const SmoothOracle> f;
  std::shared_ptr<const ProxFriendly> g;
  std::string name;
};

/// F(x) = f(x) + g(x); +inf outside dom g.
inline ExtendedReal eval_objective(const CompositeProblem& problem, const Vector& x) {
  if (x.size() != problem.dim()) {
    throw DataError("eval_objective: point has dimension " + std::to_string(x.size()) +
                    ", expected " + std::to_string(problem.dim()));
  }
  const double gx = problem.g->value(x);
  if (gx == kInf) return ExtendedReal::infinity();
  const double fx = problem.f->value(x);
  if (!std::isfinite(fx) || !std::isfinite(gx)) {
    throw NumericalError("non-finite objective at a point of dom g");
  }
  return fx + gx;
}

// ---------------------------------------------------------------------------
// Configuration

enum class LInitRule { BarzilaiBorwein, Constant };

struct SolverConfig {
  double q = 3.0;
  /// Inexactness constant; derived as 0.9 / (1.1 + L0) when absent.
  std::optional<double> rho;
  double sigma = 1e-4;
  double tau = 10.0;
  double l_min = 1e-12;
  double l_max = 1e8;
  double eps = 1e-6;
  int max_outer = 500;
  int max_inner = 1000;
  int max_backtracks = 60;
  std::uint64_t seed = 0;
  /// Listed with the reference parameter set; the method never reads it.
  double delta = 1e-5;
  LInitRule l_init = LInitRule::BarzilaiBorwein;
  /// Used for every L_{k,0} under LInitRule::Constant.
  double l_const = 1.0;
  /// Largest dimension for which a dense anchor Hessian is materialized.
  Index dense_cap = 2000;
};

inline SolverConfig validate_config(SolverConfig raw) {
  const auto require = [](bool ok, const char* field) {
    if (!ok) throw ConfigError(field);
  };
  require(std::isfinite(raw.q) && raw.q >= 2.0 && raw.q <= 3.0, "q");
  if (raw.rho) require(*raw.rho > 0.0 && *raw.rho < 1.0, "rho");
  require(raw.sigma > 0.0 && raw.sigma < 1.0, "sigma");
  require(std::isfinite(raw.tau) && raw.tau > 1.0, "tau");
  require(std::isfinite(raw.l_min) && raw.l_min > 0.0, "l_min");
  require(std::isfinite(raw.l_max) && raw.l_max > raw.l_min, "l_max");
  require(std::isfinite(raw.eps) && raw.eps > 0.0, "eps");
  require(raw.max_outer > 0, "max_outer");
  require(raw.max_inner > 0, "max_inner");
  require(raw.max_backtracks > 0, "max_backtracks");
  require(raw.delta > 0.0, "delta");
  require(std::isfinite(raw.l_const) && raw.l_const > 0.0, "l_const");
  require(raw.dense_cap >= 0, "dense_cap");
  return raw;
}

// ---------------------------------------------------------------------------
// Records

enum class Selection { Y, YMinusV };

inline const char* to_string(Selection s) { return s == Selection::Y ? "Y" : "Y_MINUS_V"; }

struct IterationTrace {
  int k = 0;
  double L_k = 0.0;
  int j_k = 0;
  double step_norm = 0.0;    // |y^k - x^k|
  double inner_resid = 0.0;  // r_k(y^k)
  double outer_resid = 0.0;  // r(x^k)
  double F_xk = 0.0;
  Selection selection = Selection::Y;
  int inner_iters = 0;  // summed over every L_{k,j} attempt
  double wall_ms = 0.0;

  bool operator==(const IterationTrace&) const = default;
};

enum class SolveStatus { Converged, MaxIterations, InnerFailure, NumericalError };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::InnerFailure: return "InnerFailure";
    case SolveStatus::NumericalError: return "NumericalError";
  }
  return "?";
}

enum class CertificateKind { FirstOrder, SecondOrder, ErrorBoundL1 };

inline const char* to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::FirstOrder: return "FirstOrder";
    case CertificateKind::SecondOrder: return "SecondOrder";
    case CertificateKind::ErrorBoundL1: return "ErrorBoundL1";
  }
  return "?";
}

struct Certificate {
  CertificateKind kind = CertificateKind::FirstOrder;
  bool passed = false;
  std::map<std::string, double> evidence;
  double tolerance = 0.0;
  std::string note;

  bool operator==(const Certificate&) const = default;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  Vector x_final;
  double F_final = 0.0;
  double resid_final = 0.0;
  std::vector<IterationTrace> traces;
  std::optional<double> rate_estimate;
  double L0 = 0.0;
  double rho = 0.0;
  std::string message;
  std::vector<Certificate> certificates;

  int iterations() const { return static_cast<int>(traces.size()); }
};

}  // namespace qreg
