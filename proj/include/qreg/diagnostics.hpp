#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qreg/core.hpp"
#include "qreg/model.hpp"
#include "qreg/prox.hpp"

namespace qreg {

/// Coordinates with |x_i| above this count as support for certificates.
inline constexpr double kSupportTolerance = 1e-10;
inline constexpr double kDefaultCertificateTol = 1e-8;

struct RateEstimate {
  std::vector<double> orders;
  std::optional<double> summary;  // empty when not estimable
  int tail_start = -1;

  bool estimable() const { return summary.has_value(); }
};

/// Empirical orders p_k = log r_{k+1} / log r_k over the tail that starts
/// where r first reaches 1e-2. Summary is the median of the last three.
inline RateEstimate estimate_rate(const std::vector<double>& residuals) {
  RateEstimate est;
  std::size_t start = residuals.size();
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (residuals[i] > 0.0 && residuals[i] <= 1e-2) {
      start = i;
      break;
    }
  }
  if (start == residuals.size()) return est;
  est.tail_start = static_cast<int>(start);

  std::vector<double> tail;
  for (std::size_t i = start; i < residuals.size(); ++i) {
    if (!(residuals[i] > 0.0) || !std::isfinite(residuals[i])) break;
    tail.push_back(residuals[i]);
  }
  for (std::size_t i = 0; i + 1 < tail.size(); ++i) {
    const double p = std::log(tail[i + 1]) / std::log(tail[i]);
    if (std::isfinite(p) && tail[i] < 1.0) est.orders.push_back(p);
  }
  if (tail.size() < 4 || est.orders.size() < 3) return est;
  std::vector<double> last(est.orders.end() - 3, est.orders.end());
  std::sort(last.begin(), last.end());
  est.summary = last[1];
  return est;
}

/// Smallest k such that the k largest magnitudes carry 99.9% of |x|_1.
inline int count_nonzeros(const Vector& x) {
  const double total = x.lpNorm<1>();
  if (total == 0.0) return 0;
  std::vector<double> mags(x.data(), x.data() + x.size());
  for (double& v : mags) v = std::abs(v);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double prefix = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    prefix += mags[k];
    if (prefix >= 0.999 * total) return static_cast<int>(k + 1);
  }
  return static_cast<int>(mags.size());
}

inline std::vector<Index> support_of(const Vector& x, double tol = kSupportTolerance) {
  std::vector<Index> idx;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > tol) idx.push_back(i);
  }
  return idx;
}

/// [grad^2 f(x)]_{idx, idx}, from the dense Hessian when offered, else one
/// Hessian-vector product per index.
inline Matrix restricted_hessian(const SmoothOracle& f, const Vector& x,
                                 const std::vector<Index>& idx, Index cap = 2000) {
  const Index k = static_cast<Index>(idx.size());
  if (k > cap) {
    throw NotCheckable("restricted Hessian of size " + std::to_string(k) + " exceeds cap " +
                       std::to_string(cap));
  }
  const auto H = f.hessian(x);
  Matrix out(k, k);
  if (auto dense = H->dense()) {
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) out(a, b) = (*dense)(idx[a], idx[b]);
  } else {
    Vector e = Vector::Zero(f.dim());
    for (Index b = 0; b < k; ++b) {
      e[idx[b]] = 1.0;
      const Vector col = H->apply(e);
      e[idx[b]] = 0.0;
      for (Index a = 0; a < k; ++a) out(a, b) = col[idx[a]];
    }
  }
  return 0.5 * (out + out.transpose());
}

inline Matrix full_hessian(const SmoothOracle& f, const Vector& x, Index cap = 2000) {
  if (f.dim() > cap) {
    throw NotCheckable("dense Hessian of dimension " + std::to_string(f.dim()) +
                       " exceeds cap " + std::to_string(cap));
  }
  std::vector<Index> all(static_cast<std::size_t>(f.dim()));
  for (Index i = 0; i < f.dim(); ++i) all[static_cast<std::size_t>(i)] = i;
  return restricted_hessian(f, x, all, cap);
}

inline double min_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return kInf;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue iteration failed");
  return es.eigenvalues().minCoeff();
}

/// Smallest |eigenvalue| of a symmetric matrix, i.e. its smallest singular value.
inline double min_abs_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return kInf;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue iteration failed");
  return es.eigenvalues().cwiseAbs().minCoeff();
}

/// min over i outside the support of (lambda - |grad_i|); +inf if x has full support.
inline double complementarity_margin(const Vector& x, const Vector& grad, double lambda) {
  double margin = kInf;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) <= kSupportTolerance) margin = std::min(margin, lambda - std::abs(grad[i]));
  }
  return margin;
}

inline Certificate first_order_check(const CompositeProblem& problem, const Vector& x, double eps) {
  Certificate c;
  c.kind = CertificateKind::FirstOrder;
  c.tolerance = eps;
  c.evidence["residual"] = outer_residual(problem, x).norm;
  c.passed = c.evidence["residual"] <= eps;
  return c;
}

namespace detail {

inline Certificate second_order_l1(const CompositeProblem& problem, const L1Norm& g,
                                   const Vector& x, double tol, Index cap) {
  Certificate c;
  c.kind = CertificateKind::SecondOrder;
  c.tolerance = tol;
  const Vector grad = problem.f->gradient(x);
  const auto J = support_of(x);
  const double margin = complementarity_margin(x, grad, g.lambda());
  const double h_min = min_eigenvalue(restricted_hessian(*problem.f, x, J, cap));
  c.evidence["residual"] = outer_residual(problem, x).norm;
  c.evidence["support_size"] = static_cast<double>(J.size());
  c.evidence["complementarity_margin"] = margin;
  c.evidence["H_min"] = h_min;
  c.passed = margin > tol && h_min >= -tol;
  c.note = "restricted-Hessian test; exact under strict complementarity";
  return c;
}

inline Certificate second_order_simplex(const CompositeProblem& problem, const Vector& x,
                                        double tol, std::uint64_t seed, int samples, Index cap) {
  Certificate c;
  c.kind = CertificateKind::SecondOrder;
  c.tolerance = tol;
  const Index n = x.size();
  const Matrix H = full_hessian(*problem.f, x, cap);

  std::vector<Index> face;
  for (Index i = 0; i < n; ++i)
    if (x[i] > kSupportTolerance) face.push_back(i);
  const Index k = static_cast<Index>(face.size());

  double tangent_min = kInf;
  if (k > 1) {
    Matrix HF(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) HF(a, b) = H(face[a], face[b]);
    // Columns 2..k of Q from a Householder QR of the all-ones vector span {sum d = 0}.
    Eigen::HouseholderQR<Matrix> qr(Matrix::Ones(k, 1));
    const Matrix Q = qr.householderQ() * Matrix::Identity(k, k);
    const Matrix Z = Q.rightCols(k - 1);
    tangent_min = min_eigenvalue(Z.transpose() * HF * Z);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  double sampled_min = kInf;
  Vector z(n);
  for (int t = 0; t < samples; ++t) {
    z.setZero();
    if (t % 2 == 0) {
      for (Index i = 0; i < n; ++i) z[i] = -std::log(1.0 - unif(rng));
    } else {
      const int m = 1 + t % 5;
      for (int i = 0; i < m; ++i) z[pick(rng)] += -std::log(1.0 - unif(rng));
    }
    z /= z.sum();
    const Vector d = z - x;
    const double dn = d.squaredNorm();
    if (dn <= 1e-24) continue;
    sampled_min = std::min(sampled_min, d.dot(H * d) / dn);
  }

  c.evidence["residual"] = outer_residual(problem, x).norm;
  c.evidence["face_size"] = static_cast<double>(k);
  c.evidence["tangent_min_eig"] = tangent_min;
  c.evidence["sampled_min_curvature"] = sampled_min;
  c.passed = tangent_min >= -tol && sampled_min >= -tol;
  c.note = "sufficient evidence: tangent-space eigencheck plus sampled feasible directions";
  return c;
}

}  // namespace detail

/// Second-order stationarity evidence at an approximately stationary x.
inline Certificate second_order_check(const CompositeProblem& problem, const Vector& x,
                                      double tol = kDefaultCertificateTol, std::uint64_t seed = 0,
                                      int samples = 10000, Index cap = 2000) {
  if (const auto* l1 = dynamic_cast<const L1Norm*>(problem.g.get())) {
    return detail::second_order_l1(problem, *l1, x, tol, cap);
  }
  if (dynamic_cast<const SimplexIndicator*>(problem.g.get())) {
    return detail::second_order_simplex(problem, x, tol, seed, samples, cap);
  }
  // Unconstrained reading: every direction is admissible.
  Certificate c;
  c.kind = CertificateKind::SecondOrder;
  c.tolerance = tol;
  const double h_min = min_eigenvalue(full_hessian(*problem.f, x, cap));
  c.evidence["residual"] = outer_residual(problem, x).norm;
  c.evidence["H_min"] = h_min;
  c.passed = h_min >= -tol;
  return c;
}

/// Sufficient condition for the local Lipschitzian error bound with
/// g = lambda |.|_1: grad^2 f - I and [grad^2 f]_JJ nonsingular plus strict
/// complementarity off the support.
inline Certificate error_bound_check_l1(const CompositeProblem& problem, const Vector& x,
                                        double tol = kDefaultCertificateTol, Index cap = 2000) {
  const auto* l1 = dynamic_cast<const L1Norm*>(problem.g.get());
  if (!l1) throw NotCheckable("error bound certificate requires g = lambda*|.|_1");
  const Matrix H = full_hessian(*problem.f, x, cap);
  const auto J = support_of(x);
  Matrix HJJ(static_cast<Index>(J.size()), static_cast<Index>(J.size()));
  for (std::size_t a = 0; a < J.size(); ++a)
    for (std::size_t b = 0; b < J.size(); ++b)
      HJJ(static_cast<Index>(a), static_cast<Index>(b)) = H(J[a], J[b]);

  Certificate c;
  c.kind = CertificateKind::ErrorBoundL1;
  c.tolerance = tol;
  c.evidence["sigma_min_H_minus_I"] =
      min_abs_eigenvalue(H - Matrix::Identity(H.rows(), H.cols()));
  c.evidence["sigma_min_H_JJ"] = min_abs_eigenvalue(HJJ);
  c.evidence["complementarity_margin"] =
      complementarity_margin(x, problem.f->gradient(x), l1->lambda());
  c.passed = c.evidence["sigma_min_H_minus_I"] > tol && c.evidence["sigma_min_H_JJ"] > tol &&
             c.evidence["complementarity_margin"] > tol;
  return c;
}

}  // namespace qreg
