#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "qreg/core.hpp"
#include "qreg/problems/data_io.hpp"
#include "qreg/problems/dct.hpp"
#include "qreg/problems/mvsk.hpp"
#include "qreg/problems/rng.hpp"
#include "qreg/problems/student_t.hpp"

namespace qreg {

struct StudentTParams {
  Index n = 4096;
  double d = 20.0;  // dynamic range in dB
  std::uint64_t seed = 0;
  double c_lambda = 0.1;
  double nu = 0.25;
  double noise_scale = 0.1;
  int noise_dof = 4;
};

struct StudentTInstance {
  StudentTParams params;
  Index m = 0;
  std::vector<Index> rows;  // J, sorted
  Vector x_true;
  Vector b;
  double lambda = 0.0;
  std::shared_ptr<const PartialDct> A;

  CompositeProblem problem() const {
    return student_t_oracle(A, b, params.nu, lambda, "student_t");
  }
  /// Starting point A^T b.
  Vector x0() const { return A->adjoint(b); }
};

/// Sparse spike signal observed through m = floor(n/8) random DCT rows with
/// scaled Student's t noise; lambda = c_lambda |grad f(0)|_inf.
inline StudentTInstance gen_student_t_instance(const StudentTParams& p) {
  if (p.n < 8) throw DataError("student_t generator: n must be at least 8");
  if (!(p.nu > 0.0) || !(p.c_lambda > 0.0) || p.noise_scale < 0.0 || p.noise_dof < 1) {
    throw DataError("student_t generator: invalid parameters");
  }
  StudentTInstance inst;
  inst.params = p;
  inst.m = p.n / 8;
  Rng rng(p.seed);

  const Index s = std::max<Index>(p.n / 40, 1);
  const auto support = rng.sample_without_replacement(p.n, s);
  inst.x_true = Vector::Zero(p.n);
  for (const auto i : support) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    inst.x_true[i] = sign * std::pow(10.0, p.d * rng.uniform() / 20.0);
  }

  const auto picked = rng.sample_without_replacement(p.n, inst.m);
  inst.rows.assign(picked.begin(), picked.end());
  std::sort(inst.rows.begin(), inst.rows.end());
  inst.A = std::make_shared<PartialDct>(p.n, inst.rows);

  inst.b = inst.A->apply(inst.x_true);
  for (Index i = 0; i < inst.m; ++i) inst.b[i] += p.noise_scale * rng.student_t(p.noise_dof);

  const Vector g0 = inst.A->adjoint(
      (-inst.b).unaryExpr([&](double u) { return StudentTLoss::dpsi(u, p.nu); }).eval());
  inst.lambda = p.c_lambda * g0.cwiseAbs().maxCoeff();
  if (!(inst.lambda > 0.0)) throw DataError("student_t generator: degenerate lambda");
  return inst;
}

struct LogisticParams {
  Index m = 200;
  Index n = 200;
  Index support = 10;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

struct LogisticInstance {
  Matrix A;
  Vector b;
};

/// Gaussian design; labels are signs of a sparse linear score plus noise.
inline LogisticInstance gen_logistic_instance(const LogisticParams& p) {
  if (p.m < 1 || p.n < 1 || p.support < 0 || p.support > p.n || p.noise < 0.0) {
    throw DataError("logistic generator: invalid parameters");
  }
  Rng rng(p.seed);
  LogisticInstance inst;
  inst.A.resize(p.m, p.n);
  for (Index i = 0; i < p.m; ++i)
    for (Index j = 0; j < p.n; ++j) inst.A(i, j) = rng.normal();
  Vector w = Vector::Zero(p.n);
  for (Index j = 0; j < p.support; ++j) w[j] = rng.normal();
  inst.b.resize(p.m);
  for (Index i = 0; i < p.m; ++i) {
    inst.b[i] = inst.A.row(i).dot(w) + p.noise * rng.normal() > 0.0 ? 1.0 : -1.0;
  }
  return inst;
}

struct SyntheticReturnsParams {
  Index assets = 50;
  Index periods = 52;
  std::uint64_t seed = 0;
};

/// Price paths (periods + 1 rows) from a one-factor model with heavy-tailed
/// and skewed shocks; weekly log-returns are of order a few percent.
inline ReturnsTable gen_synthetic_prices(const SyntheticReturnsParams& p) {
  if (p.assets < 1 || p.periods < 2) throw DataError("returns generator: invalid shape");
  Rng rng(p.seed);
  const Index n = p.assets;
  Vector mu(n), beta(n), vol(n), skew(n), price(n);
  for (Index i = 0; i < n; ++i) {
    mu[i] = 0.002 * rng.normal() + 0.001;
    beta[i] = 0.5 + rng.uniform();
    vol[i] = 0.01 + 0.03 * rng.uniform();
    skew[i] = 0.5 * (rng.uniform() - 0.5);
    price[i] = 20.0 + 180.0 * rng.uniform();
  }
  ReturnsTable t;
  for (Index i = 0; i < n; ++i) t.tickers.push_back("A" + std::to_string(i));
  t.returns.resize(p.periods + 1, n);  // rows are periods here; transposed on output
  t.returns.row(0) = price.transpose();
  for (Index k = 1; k <= p.periods; ++k) {
    const double market = 0.02 * rng.student_t(4);
    for (Index i = 0; i < n; ++i) {
      const double e = rng.student_t(5);
      const double r = mu[i] + beta[i] * market + vol[i] * (e + skew[i] * (e * e - 5.0 / 3.0));
      price[i] *= std::exp(r);
      t.returns(k, i) = price[i];
    }
  }
  return t;
}

/// Writes prices as a returns CSV (header of tickers, one row per period).
inline void write_prices_csv(std::ostream& out, const ReturnsTable& prices) {
  for (std::size_t i = 0; i < prices.tickers.size(); ++i) out << (i ? "," : "") << prices.tickers[i];
  out << "\n";
  char buf[64];
  for (Index r = 0; r < prices.returns.rows(); ++r) {
    for (Index c = 0; c < prices.returns.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", prices.returns(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

/// Moments of synthetic weekly log-returns (in percent) for n assets.
inline Moments gen_synthetic_moments(const SyntheticReturnsParams& p) {
  const ReturnsTable prices = gen_synthetic_prices(p);
  std::ostringstream os;
  write_prices_csv(os, prices);
  std::istringstream is(os.str());
  return sample_moments(parse_returns_csv(is, true).returns);
}

}  // namespace qreg
