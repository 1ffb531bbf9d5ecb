#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>

#include "qreg/core.hpp"
#include "qreg/problems/rng.hpp"
#include "qreg/prox.hpp"

namespace qreg {

/// Sample moments of n assets over T periods. Coskewness is stored as an
/// n x n^2 matrix S(i, j*n + k), cokurtosis as n x n^3 K(i, (j*n + k)*n + l).
struct Moments {
  Vector mu;
  Matrix Sigma;
  Matrix S;
  Matrix K;

  Index assets() const { return mu.size(); }
};

namespace detail {

/// x (x) x as a length-n^2 vector, index j*n + k.
inline Vector kron2(const Vector& x) {
  const Index n = x.size();
  Vector out(n * n);
  for (Index j = 0; j < n; ++j) out.segment(j * n, n) = x[j] * x;
  return out;
}

inline Vector kron3(const Vector& x) {
  const Index n = x.size();
  const Vector xx = kron2(x);
  Vector out(n * n * n);
  for (Index j = 0; j < n; ++j) out.segment(j * n * n, n * n) = x[j] * xx;
  return out;
}

}  // namespace detail

/// Central co-moments of the columns of `returns` (n x T), normalized by T.
/// Every permutation of a tensor index receives the same accumulated value,
/// so S and K are exactly symmetric.
inline Moments sample_moments(const Matrix& returns) {
  const Index n = returns.rows();
  const Index T = returns.cols();
  if (T < 2) throw DataError("sample_moments: need at least two periods");
  Moments m;
  m.mu = returns.rowwise().mean();
  const Matrix C = returns.colwise() - m.mu;
  const double invT = 1.0 / static_cast<double>(T);
  m.Sigma.resize(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) m.Sigma(i, j) = m.Sigma(j, i) = C.row(i).dot(C.row(j)) * invT;

  m.S.resize(n, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j)
      for (Index k = j; k < n; ++k) {
        double s = 0.0;
        for (Index t = 0; t < T; ++t) s += C(i, t) * C(j, t) * C(k, t);
        s *= invT;
        const std::array<Index, 3> id{i, j, k};
        const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (const auto& p : perms) m.S(id[p[0]], id[p[1]] * n + id[p[2]]) = s;
      }

  m.K.resize(n, n * n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j)
      for (Index k = j; k < n; ++k)
        for (Index l = k; l < n; ++l) {
          double s = 0.0;
          for (Index t = 0; t < T; ++t) s += C(i, t) * C(j, t) * C(k, t) * C(l, t);
          s *= invT;
          std::array<Index, 4> id{i, j, k, l};
          // std::next_permutation visits each distinct ordering once from the sorted start.
          do {
            m.K(id[0], (id[1] * n + id[2]) * n + id[3]) = s;
          } while (std::next_permutation(id.begin(), id.end()));
        }
  return m;
}

/// Checks Sigma, S, K for symmetry on `samples` random index tuples.
inline void check_moment_symmetry(const Moments& m, double tol = 1e-8, std::uint64_t seed = 1,
                                  int samples = 500) {
  const Index n = m.assets();
  if (m.Sigma.rows() != n || m.Sigma.cols() != n || m.S.rows() != n || m.S.cols() != n * n ||
      m.K.rows() != n || m.K.cols() != n * n * n) {
    throw DataError("mvsk: moment shapes do not match the number of assets");
  }
  const double scale_s = 1.0 + m.Sigma.cwiseAbs().maxCoeff();
  if ((m.Sigma - m.Sigma.transpose()).cwiseAbs().maxCoeff() > tol * scale_s) {
    throw DataError("mvsk: covariance is not symmetric");
  }
  Rng rng(seed);
  const auto idx = [&] { return static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))); };
  const double s3 = 1.0 + m.S.cwiseAbs().maxCoeff();
  const double s4 = 1.0 + m.K.cwiseAbs().maxCoeff();
  for (int t = 0; t < samples; ++t) {
    const Index i = idx(), j = idx(), k = idx(), l = idx();
    const double a = m.S(i, j * n + k);
    if (std::abs(a - m.S(j, i * n + k)) > tol * s3 || std::abs(a - m.S(k, j * n + i)) > tol * s3 ||
        std::abs(a - m.S(i, k * n + j)) > tol * s3) {
      throw DataError("mvsk: coskewness tensor is not symmetric");
    }
    const double b = m.K(i, (j * n + k) * n + l);
    if (std::abs(b - m.K(j, (i * n + k) * n + l)) > tol * s4 ||
        std::abs(b - m.K(l, (j * n + k) * n + i)) > tol * s4 ||
        std::abs(b - m.K(i, (k * n + j) * n + l)) > tol * s4 ||
        std::abs(b - m.K(i, (j * n + l) * n + k)) > tol * s4) {
      throw DataError("mvsk: cokurtosis tensor is not symmetric");
    }
  }
}

/// f(x) = -w1 mu'x + w2 x'Sigma x - w3 S[x,x,x] + w4 K[x,x,x,x].
class MvskObjective final : public SmoothOracle {
 public:
  MvskObjective(std::shared_ptr<const Moments> m, std::array<double, 4> omega)
      : m_(std::move(m)), w_(omega) {
    if (!m_) throw DataError("mvsk: missing moments");
    check_moment_symmetry(*m_);
    double sum = 0.0;
    for (double w : w_) {
      if (!(w >= 0.0)) throw DataError("mvsk: preference weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DataError("mvsk: preference weights must sum to 1");
  }

  Index dim() const override { return m_->assets(); }
  const Moments& moments() const { return *m_; }
  const std::array<double, 4>& omega() const { return w_; }

  double value(const Vector& x) const override {
    const Vector Sxx = m_->S * detail::kron2(x);
    const Vector Kxxx = m_->K * detail::kron3(x);
    return -w_[0] * m_->mu.dot(x) + w_[1] * x.dot(m_->Sigma * x) - w_[2] * x.dot(Sxx) +
           w_[3] * x.dot(Kxxx);
  }

  Vector gradient(const Vector& x) const override {
    const Vector Sxx = m_->S * detail::kron2(x);
    const Vector Kxxx = m_->K * detail::kron3(x);
    return -w_[0] * m_->mu + 2.0 * w_[1] * (m_->Sigma * x) - 3.0 * w_[2] * Sxx + 4.0 * w_[3] * Kxxx;
  }

  std::shared_ptr<const HessianOperator> hessian(const Vector& x) const override {
    const Index n = dim();
    // S[x,.,.] and K[x,x,.,.] by contracting leading indices.
    const Vector xS = m_->S.transpose() * x;  // n^2, index j*n + k
    const Vector xK = m_->K.transpose() * x;  // n^3, index (j*n + k)*n + l
    Matrix Sx = Eigen::Map<const Matrix>(xS.data(), n, n);
    const Vector xxK = Eigen::Map<const Matrix>(xK.data(), n * n, n) * x;  // contracts j
    Matrix Kxx = Eigen::Map<const Matrix>(xxK.data(), n, n);
    Matrix H = 2.0 * w_[1] * m_->Sigma - 6.0 * w_[2] * Sx + 12.0 * w_[3] * Kxx;
    H = 0.5 * (H + H.transpose()).eval();
    return std::make_shared<DenseHessian>(std::move(H));
  }

 private:
  std::shared_ptr<const Moments> m_;
  std::array<double, 4> w_;
};

inline CompositeProblem mvsk_oracle(std::shared_ptr<const Moments> m, std::array<double, 4> omega,
                                    std::string name = "mvsk") {
  auto f = std::make_shared<MvskObjective>(std::move(m), omega);
  auto g = std::make_shared<SimplexIndicator>(f->dim());
  return CompositeProblem(std::move(f), std::move(g), std::move(name));
}

inline CompositeProblem mvsk_oracle(Moments m, std::array<double, 4> omega) {
  return mvsk_oracle(std::make_shared<const Moments>(std::move(m)), omega);
}

}  // namespace qreg
