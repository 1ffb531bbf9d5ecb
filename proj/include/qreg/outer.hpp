#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

#include "qreg/core.hpp"
#include "qreg/diagnostics.hpp"
#include "qreg/inner.hpp"
#include "qreg/model.hpp"

namespace qreg {

/// Regularization seed from the change in Hessian along the last step:
///   clamp(|[H(x_new) - H(x_old)](x_new - x_old)| / |x_new - x_old|^{q-1}, l_min, l_max).
/// Returns `fallback` when the two points coincide.
inline double bb_init(const Vector& x_new, const Vector& x_old, const HessianOperator& h_new,
                      const HessianOperator& h_old, double q, double l_min, double l_max,
                      double fallback) {
  const Vector d = x_new - x_old;
  const double dn = d.norm();
  if (dn == 0.0) return std::clamp(fallback, l_min, l_max);
  const double ratio = (h_new.apply(d) - h_old.apply(d)).norm() / std::pow(dn, q - 1.0);
  if (std::isnan(ratio)) return l_min;
  return std::max(std::min(ratio, l_max), l_min);
}

inline bool check_inexact(const ModelState& m, const ProxFriendly& g, const Vector& y, double rho) {
  const double theta = subproblem_objective(m, g, y);
  if (!(theta < m.F_anchor)) return false;
  const double rk = subproblem_residual(m, g, y).norm;
  return rk <= rho * m.L * std::pow((y - m.anchor).norm(), m.q - 1.0);
}

/// F(y) <= F(x^k) - (sigma L / q) |y - x^k|^q.
inline bool check_descent(double F_xk, double F_y, double L, double q, double sigma,
                          double step_norm) {
  if (!(F_y < kInf)) return false;
  return F_y <= F_xk - (sigma * L / q) * std::pow(step_norm, q);
}

struct Selected {
  Vector x;
  Selection selection = Selection::Y;
  ExtendedReal F;
  ExtendedReal F_y;
  ExtendedReal F_y_minus_v;
};

/// x^{k+1} = y if F(y) < F(y - v), else y - v.
inline Selected select_next(const CompositeProblem& problem, const Vector& y, const Vector& v) {
  Selected s;
  Vector ymv = y - v;
  s.F_y = eval_objective(problem, y);
  s.F_y_minus_v = eval_objective(problem, ymv);
  if (s.F_y < s.F_y_minus_v) {
    s.x = y;
    s.selection = Selection::Y;
    s.F = s.F_y;
  } else {
    s.x = std::move(ymv);
    s.selection = Selection::YMinusV;
    s.F = s.F_y_minus_v;
  }
  if (!s.F.is_finite()) throw InvariantViolation("select_next: selected point lies outside dom g");
  return s;
}

/// Smallest L0 in {1, 2, 4, ...} for which the prox-gradient point
/// x* = prox_{g/L0}(x0 - grad f(x0)/L0) satisfies the quadratic upper bound.
inline double estimate_L0(const CompositeProblem& problem, const Vector& x0) {
  const double f0 = problem.f->value(x0);
  const Vector g0 = problem.f->gradient(x0);
  if (!std::isfinite(f0) || !g0.allFinite()) throw NumericalError("estimate_L0: non-finite f at x0");
  const double slack = 1e-12 * (1.0 + std::abs(f0));
  for (int e = 0; e <= 60; ++e) {
    const double L = std::ldexp(1.0, e);
    const Vector xs = problem.g->prox(x0 - g0 / L, 1.0 / L);
    const Vector d = xs - x0;
    const double fs = problem.f->value(xs);
    if (std::isfinite(fs) && fs <= f0 + g0.dot(d) + 0.5 * L * d.squaredNorm() + slack) return L;
  }
  throw NumericalError("estimate_L0: no majorizing L0 up to 2^60");
}

/// Everything about one accepted outer iteration, for auditing.
struct AcceptedStep {
  int k;
  const ModelState& model;  // carries L_k, anchor x^k and Theta_k(x^k)
  const Vector& y;
  const Vector& v;
  const Selected& next;
  double F_x;
  double rho;
  double sigma;
  double l_min;
  int j;
};

using StepObserver = std::function<void(const AcceptedStep&)>;

namespace detail {

inline bool zero_step(const Vector& x_new, const Vector& x_old) {
  return (x_new - x_old).norm() <=
         1e3 * std::numeric_limits<double>::epsilon() * (1.0 + x_old.norm());
}

inline bool below_resolution(double F_x, double F_y) {
  return std::isfinite(F_y) &&
         std::abs(F_y - F_x) <= 8.0 * std::numeric_limits<double>::epsilon() *
                                    std::max(1.0, std::abs(F_x));
}

}  // namespace detail

/// Inexact q-order regularized proximal Newton method.
inline SolveReport solve(const CompositeProblem& problem, const Vector& x0,
                         const SolverConfig& raw_cfg, const StepObserver& observer = {},
                         InnerConfig inner = {}) {
  using Clock = std::chrono::steady_clock;
  const SolverConfig cfg = validate_config(raw_cfg);
  if (x0.size() != problem.dim()) throw DataError("solve: x0 has the wrong dimension");
  const ExtendedReal F0 = eval_objective(problem, x0);
  if (!F0.is_finite()) throw InvariantViolation("solve: x0 is outside dom g");

  SolveReport report;
  Vector x = x0;
  double Fx = F0.value();
  std::vector<double> residuals;

  const auto finish = [&](SolveStatus status, std::string message) {
    report.status = status;
    report.message = std::move(message);
    report.x_final = x;
    report.F_final = Fx;
    report.resid_final = outer_residual(problem, x).norm;
    if (report.status == SolveStatus::Converged && report.resid_final > cfg.eps) {
      report.status = SolveStatus::NumericalError;
      report.message = "residual above tolerance at exit";
    }
    if (residuals.empty() || residuals.back() != report.resid_final) {
      residuals.push_back(report.resid_final);
    }
    const auto rate = estimate_rate(residuals);
    report.rate_estimate = rate.summary;
    return report;
  };

  try {
    report.L0 = estimate_L0(problem, x0);
    const double rho = cfg.rho.value_or(0.9 / (1.1 + report.L0));
    report.rho = rho;
    double L = std::clamp(cfg.l_init == LInitRule::Constant ? cfg.l_const : report.L0, cfg.l_min,
                          cfg.l_max);

    Vector x_prev;
    std::shared_ptr<const HessianOperator> hess_prev;
    double L_prev = L;

    for (int k = 0;; ++k) {
      const auto t0 = Clock::now();
      const Residual Rx = outer_residual(problem, x);
      if (!std::isfinite(Rx.norm)) throw NumericalError("non-finite residual");
      residuals.push_back(Rx.norm);
      if (Rx.norm <= cfg.eps) return finish(SolveStatus::Converged, "residual below eps");
      if (k >= cfg.max_outer) return finish(SolveStatus::MaxIterations, "outer budget exhausted");

      const ModelState base = build_model(problem, x, 1.0, cfg.q, cfg.dense_cap);
      const double hess_norm = estimate_hessian_norm(base);
      if (k == 0 || cfg.l_init == LInitRule::Constant) {
        if (k > 0) L = std::clamp(cfg.l_const, cfg.l_min, cfg.l_max);
      } else {
        L = bb_init(x, x_prev, *base.hess, *hess_prev, cfg.q, cfg.l_min, cfg.l_max, L_prev);
      }

      int inner_total = 0;
      bool accepted = false;
      int j = 0;
      InnerResult ir;
      ModelState model = base;
      double F_y = kInf;
      for (; j <= cfg.max_backtracks; ++j) {
        model = base.with_L(L);
        InnerConfig icfg = inner;
        icfg.max_iters = cfg.max_inner;
        icfg.gamma_init = 1.0 / (hess_norm + L);
        ir = solve_subproblem(model, *problem.g, rho, icfg);
        inner_total += ir.iters;
        if (ir.satisfied) {
          F_y = eval_objective(problem, ir.y).value();
          if (check_descent(Fx, F_y, L, cfg.q, cfg.sigma, (ir.y - x).norm())) {
            accepted = true;
            break;
          }
          // Raising L cannot help once F no longer resolves the change.
          if (detail::below_resolution(Fx, F_y)) {
            return finish(SolveStatus::NumericalError,
                          "objective change below floating-point resolution");
          }
        }
        if (j == cfg.max_backtracks) break;
        L *= cfg.tau;
      }
      if (!accepted && ir.stalled) {
        return finish(SolveStatus::NumericalError,
                      "subproblem tolerance below floating-point resolution");
      }
      if (!accepted) {
        return finish(SolveStatus::InnerFailure,
                      "no acceptable step after " + std::to_string(cfg.max_backtracks) +
                          " increases of L");
      }

      const Selected next = select_next(problem, ir.y, ir.R);

      IterationTrace tr;
      tr.k = k;
      tr.L_k = L;
      tr.j_k = j;
      tr.step_norm = (ir.y - x).norm();
      tr.inner_resid = ir.resid;
      tr.outer_resid = Rx.norm;
      tr.F_xk = Fx;
      tr.selection = next.selection;
      tr.inner_iters = inner_total;

      if (observer) {
        observer(AcceptedStep{k, model, ir.y, ir.R, next, Fx, rho, cfg.sigma, cfg.l_min, j});
      }

      const bool stalled = detail::zero_step(next.x, x);
      x_prev = std::move(x);
      x = next.x;
      Fx = next.F.value();
      hess_prev = base.hess;
      L_prev = L;
      tr.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      report.traces.push_back(tr);

      if (stalled) {
        const double r = outer_residual(problem, x).norm;
        return finish(r <= cfg.eps ? SolveStatus::Converged : SolveStatus::NumericalError,
                      "zero step: x^{k+1} = x^k");
      }
    }
  } catch (const NumericalError& e) {
    return finish(SolveStatus::NumericalError, e.what());
  }
}

}  // namespace qreg
