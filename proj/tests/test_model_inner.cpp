#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace qreg;
using namespace qreg::testing;

namespace {

CompositeProblem small_logistic(std::uint64_t seed, double lambda = 0.05) {
  LogisticParams p;
  p.m = 30;
  p.n = 12;
  p.support = 4;
  p.seed = seed;
  const auto inst = gen_logistic_instance(p);
  return logistic_oracle(inst.A, inst.b, lambda);
}

CompositeProblem small_student_t(std::uint64_t seed) {
  StudentTParams p;
  p.n = 64;
  p.seed = seed;
  return gen_student_t_instance(p).problem();
}

// phi via the Moreau-envelope form f_k - gamma/2 |grad|^2 + e_{gamma g}(y - gamma grad).
double fbe_envelope_form(const ModelState& m, const ProxFriendly& g, double gamma, const Vector& y) {
  const Vector grad = model_grad(m, y);
  return model_value(m, y) - 0.5 * gamma * grad.squaredNorm() +
         moreau_envelope(g, gamma, y - gamma * grad);
}

}  // namespace

// ---------------------------------------------------------------------------
// model

TEST(Model, RegularizerConventionAtZeroDisplacement) {
  EXPECT_EQ(regularizer_coeff(3.0, 2.0, 0.0), 3.0);
  EXPECT_EQ(regularizer_coeff(3.0, 2.5, 0.0), 0.0);
  EXPECT_EQ(regularizer_coeff(3.0, 3.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(regularizer_coeff(2.0, 3.0, 4.0), 8.0);
}

TEST(Model, ValueAndGradientAtAnchor) {
  const auto p = small_logistic(1);
  Rng rng(1);
  const Vector x = random_vector(rng, p.dim(), 0.3);
  const auto m = build_model(p, x, 2.0, 2.5);
  EXPECT_EQ(model_value(m, x), p.f->value(x));
  EXPECT_TRUE(model_grad(m, x).isApprox(p.f->gradient(x)));
}

TEST(Model, GradientMatchesFiniteDifferences) {
  const auto p = small_student_t(3);
  Rng rng(2);
  const Vector x = random_vector(rng, p.dim(), 0.2);
  for (double q : {2.0, 2.3, 3.0}) {
    const auto m = build_model(p, x, 1.7, q);
    for (int t = 0; t < 5; ++t) {
      const Vector y = x + random_vector(rng, p.dim(), 0.5);
      Vector fd(p.dim());
      for (Index i = 0; i < p.dim(); ++i) {
        Vector yp = y, ym = y;
        yp[i] += 1e-6;
        ym[i] -= 1e-6;
        fd[i] = (model_value(m, yp) - model_value(m, ym)) / 2e-6;
      }
      EXPECT_LE(rel_err(model_grad(m, y), fd), 1e-6) << "q=" << q;
    }
  }
}

TEST(Model, ExplicitFormula) {
  // 1-D: f = 1/2 (x-2)^2, anchor 0, L=3, q=3, y=1: f(0) - 2 + 1/2 + 3/3 = 2 - 2 + 0.5 + 1.
  const auto p = one_d_problem();
  const auto m = build_model(p, Vector::Zero(1), 3.0, 3.0);
  EXPECT_DOUBLE_EQ(model_value(m, Vector::Constant(1, 1.0)), 1.5);
  EXPECT_DOUBLE_EQ(model_grad(m, Vector::Constant(1, 1.0))[0], -2.0 + 1.0 + 3.0);
}

TEST(Model, StrictlyIncreasingInL) {
  const auto p = small_logistic(2);
  Rng rng(4);
  const Vector x = random_vector(rng, p.dim(), 0.3);
  for (int t = 0; t < 20; ++t) {
    const Vector y = x + random_vector(rng, p.dim(), 0.1);
    const auto m = build_model(p, x, 1.0, 2.6);
    EXPECT_LT(model_value(m, y), model_value(m.with_L(1.5), y));
  }
}

TEST(Model, QNearTwoAgreesWithQuadraticRegularizer) {
  const auto p = small_logistic(3);
  Rng rng(5);
  const Vector x = random_vector(rng, p.dim(), 0.3);
  const auto m2 = build_model(p, x, 2.0, 2.0);
  const auto m2p = build_model(p, x, 2.0, 2.0 + 1e-9);
  for (double len : {0.1, 1.0, 10.0}) {
    Vector d = random_vector(rng, p.dim());
    d *= len / d.norm();
    const Vector y = x + d;
    EXPECT_LE(rel_err(model_grad(m2p, y), model_grad(m2, y)), 1e-6);
  }
}

TEST(Model, AnchorResidualIdentity) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto p = small_logistic(seed);
    Rng rng(seed);
    const Vector x = random_vector(rng, p.dim(), 0.3);
    const auto m = build_model(p, x, 0.8, 2.7);
    const auto Rk = subproblem_residual(m, *p.g, x);
    const auto R = outer_residual(p, x);
    EXPECT_EQ(Rk.vec, R.vec);
    EXPECT_EQ(Rk.norm, R.norm);
  }
}

TEST(Model, SubproblemResidualRecomputation) {
  const auto p = small_student_t(4);
  Rng rng(6);
  const Vector x = random_vector(rng, p.dim(), 0.2);
  const auto m = build_model(p, x, 1.3, 2.3);
  const Vector y = x + random_vector(rng, p.dim(), 0.3);
  const Vector grad = p.f->gradient(x) + p.f->hess_vec(x, y - x) +
                      m.L * std::pow((y - x).norm(), 0.3) * (y - x);
  const Vector expect = y - prox_l1(y - grad, 1.0, dynamic_cast<const L1Norm&>(*p.g).lambda());
  EXPECT_LE((subproblem_residual(m, *p.g, y).vec - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Model, BuildRejectsBadInputs) {
  const auto p = one_d_problem();
  EXPECT_THROW(build_model(p, Vector::Zero(1), 0.0, 3.0), DataError);
  Moments mo;
  mo.mu = Vector::Ones(2);
  mo.Sigma = Matrix::Identity(2, 2);
  mo.S = Matrix::Zero(2, 4);
  mo.K = Matrix::Zero(2, 8);
  const auto pm = mvsk_oracle(mo, {1.0, 0.0, 0.0, 0.0});
  EXPECT_THROW(build_model(pm, Vector::Zero(2), 1.0, 3.0), InvariantViolation);
}

// ---------------------------------------------------------------------------
// forward-backward envelope

TEST(Fbe, BothFormsAgreeOnRandomStates) {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const auto p = t % 2 ? small_logistic(static_cast<std::uint64_t>(t)) : small_student_t(static_cast<std::uint64_t>(t));
    const Vector x = random_vector(rng, p.dim(), 0.3);
    const double q = 2.0 + rng.uniform();
    const auto m = build_model(p, x, 0.1 + 2.0 * rng.uniform(), q);
    const Vector y = x + random_vector(rng, p.dim(), 0.2);
    const double gamma = 0.05 + 0.5 * rng.uniform();
    const double a = fbe_value(m, *p.g, gamma, y);
    const double b = fbe_envelope_form(m, *p.g, gamma, y);
    EXPECT_LE(std::abs(a - b), 1e-12 * std::max(1.0, std::abs(a))) << "state " << t;
  }
}

TEST(Fbe, ZeroFunctionReducesToGradientForm) {
  const auto p = quadratic_free(Matrix::Identity(3, 3) * 2.0, Vector::Ones(3));
  const auto m = build_model(p, Vector::Zero(3), 1.0, 3.0);
  Vector y(3);
  y << 0.3, -0.2, 0.1;
  const double gamma = 0.25;
  const Vector grad = model_grad(m, y);
  EXPECT_NEAR(fbe_value(m, *p.g, gamma, y), model_value(m, y) - 0.5 * gamma * grad.squaredNorm(),
              1e-14);
}

TEST(Fbe, EqualsObjectiveAtFixedPoint) {
  // Model of 1/2(x-2)^2 + |x| anchored at its minimizer 1 is stationary there.
  const auto p = one_d_problem();
  const Vector x = Vector::Constant(1, 1.0);
  const auto m = build_model(p, x, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(fbe_value(m, *p.g, 0.4, x), subproblem_objective(m, *p.g, x));
  EXPECT_NEAR(forward_backward_step(m, *p.g, 0.4, x)[0], 1.0, 1e-15);
}

TEST(ForwardBackward, UnitStepRecoversResidual) {
  const auto p = small_logistic(9);
  Rng rng(9);
  const Vector x = random_vector(rng, p.dim(), 0.3);
  const auto m = build_model(p, x, 1.0, 2.5);
  const Vector y = x + random_vector(rng, p.dim(), 0.2);
  EXPECT_LE((forward_backward_step(m, *p.g, 1.0, y) - (y - subproblem_residual(m, *p.g, y).vec)).norm(), 1e-15);
}

TEST(ForwardBackward, ExactOnQuadraticWithInverseCurvatureStep) {
  // q=2 model of a 1-D quadratic with curvature 3 plus L=1: curvature 4.
  const auto p = quadratic_free(Matrix::Constant(1, 1, 3.0), Vector::Constant(1, -6.0));
  const auto m = build_model(p, Vector::Zero(1), 1.0, 2.0);
  const Vector y = forward_backward_step(m, *p.g, 0.25, Vector::Zero(1));
  EXPECT_NEAR(y[0], 1.5, 1e-15);
  EXPECT_NEAR(model_grad(m, y)[0], 0.0, 1e-14);
}

// ---------------------------------------------------------------------------
// solve_subproblem

TEST(SolveSubproblem, MovesOffAnAnchorThatIsNotStationary) {
  Matrix Q(2, 2);
  Q << 2.0, 0.5, 0.5, 1.0;
  Vector c(2);
  c << -1.0, 0.5;
  const auto p = quadratic_l1(Q, c, 0.2);
  const Vector x = Vector::Zero(2);
  ASSERT_GT(outer_residual(p, x).norm, 0.0);
  const auto m = build_model(p, x, 1.0, 3.0);
  const double rho = 0.5;
  const auto r = solve_subproblem(m, *p.g, rho, {});
  ASSERT_TRUE(r.satisfied);
  EXPECT_NE(r.y, x);
  EXPECT_LE(subproblem_residual(m, *p.g, r.y).norm,
            rho * m.L * std::pow((r.y - x).norm(), 2.0));
  EXPECT_LT(subproblem_objective(m, *p.g, r.y), m.F_anchor);

  // Coordinate-descent oracle (ternary search per coordinate) for the exact
  // minimizer; Theta_k is strongly convex here, so the prox residual bounds
  // the distance to it.
  Vector z = x;
  for (int sweep = 0; sweep < 200; ++sweep) {
    for (Index i = 0; i < 2; ++i) {
      double a = -5.0, b = 5.0;
      for (int it = 0; it < 200; ++it) {
        const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
        Vector z1 = z, z2 = z;
        z1[i] = m1;
        z2[i] = m2;
        if (subproblem_objective(m, *p.g, z1) < subproblem_objective(m, *p.g, z2)) b = m2;
        else a = m1;
      }
      z[i] = 0.5 * (a + b);
    }
  }
  EXPECT_LE(subproblem_residual(m, *p.g, z).norm, 1e-7);
  EXPECT_LE(subproblem_objective(m, *p.g, z), subproblem_objective(m, *p.g, r.y));
  const double mu = Eigen::SelfAdjointEigenSolver<Matrix>(Q).eigenvalues().minCoeff();
  EXPECT_LE((r.y - z).norm(), 10.0 * r.resid / mu);
}

TEST(SolveSubproblem, StronglyConvexSmoothCase) {
  Rng rng(12);
  Matrix B(6, 6);
  for (Index i = 0; i < B.size(); ++i) B.data()[i] = rng.normal();
  const Matrix Q = B * B.transpose() + Matrix::Identity(6, 6);
  const Vector c = random_vector(rng, 6);
  const auto p = quadratic_free(Q, c);
  const Vector x = Vector::Zero(6);
  const auto m = build_model(p, x, 50.0, 2.0);
  const auto r = solve_subproblem(m, *p.g, 0.5, {});
  ASSERT_TRUE(r.satisfied);
  EXPECT_LE(r.iters, 50);
  // Newton oracle: (Q + L I) s = -c.
  const Vector s = (Q + 50.0 * Matrix::Identity(6, 6)).ldlt().solve(-c);
  // g = 0: R_k(y) = (Q + L I)(y - s), so |y - s| <= r_k / L.
  EXPECT_LE((r.y - s).norm(), r.resid / 50.0 + 1e-12);
}

TEST(SolveSubproblem, BudgetOfOneReturnsBestSeen) {
  const auto p = small_student_t(5);
  StudentTParams sp;
  sp.n = 64;
  sp.seed = 5;
  const auto inst = gen_student_t_instance(sp);
  const auto m = build_model(p, inst.x0(), 1e-3, 3.0);
  InnerConfig cfg;
  cfg.max_iters = 1;
  const auto r = solve_subproblem(m, *p.g, 1e-6, cfg);
  EXPECT_FALSE(r.satisfied);
  EXPECT_EQ(r.iters, 1);
  EXPECT_EQ(r.y.size(), p.dim());
  EXPECT_LE(r.theta_y, m.F_anchor);
}

TEST(SolveSubproblem, SatisfiedResultsRecheck) {
  Rng rng(21);
  for (int t = 0; t < 30; ++t) {
    const auto p = t % 2 ? small_logistic(static_cast<std::uint64_t>(t), 0.01)
                         : small_student_t(static_cast<std::uint64_t>(t));
    const Vector x = random_vector(rng, p.dim(), 0.3);
    const double q = 2.0 + rng.uniform();
    const double rho = 0.9 / 3.0;
    const auto m = build_model(p, x, 0.05 + rng.uniform(), q);
    const auto r = solve_subproblem(m, *p.g, rho, {});
    if (!r.satisfied) continue;
    EXPECT_LE(subproblem_residual(m, *p.g, r.y).norm,
              rho * m.L * std::pow((r.y - x).norm(), q - 1.0));
    EXPECT_LT(subproblem_objective(m, *p.g, r.y), m.F_anchor);
  }
}

TEST(SolveSubproblem, NonmonotoneArmijoContract) {
  const auto p = small_student_t(8);
  Rng rng(8);
  const Vector x = random_vector(rng, p.dim(), 0.3);
  const auto m = build_model(p, x, 1e-2, 2.5);
  InnerConfig cfg;
  int steps = 0, violations = 0;
  cfg.on_step = [&](double phi, double window_max, double forcing) {
    ++steps;
    if (!(phi <= window_max - forcing) || !(forcing > 0.0)) ++violations;
  };
  solve_subproblem(m, *p.g, 1e-12, cfg);  // tiny rho forces many iterations
  EXPECT_GT(steps, 5);
  EXPECT_EQ(violations, 0);
}

TEST(SolveSubproblem, PureForwardBackwardIsMonotone) {
  const auto p = small_student_t(10);
  Rng rng(10);
  const Vector x = random_vector(rng, p.dim(), 0.3);
  const auto m = build_model(p, x, 1e-2, 2.3);
  InnerConfig cfg;
  cfg.use_direction = false;
  cfg.max_iters = 300;
  std::vector<double> thetas;
  cfg.on_iterate = [&](double theta) { thetas.push_back(theta); };
  solve_subproblem(m, *p.g, 1e-12, cfg);
  ASSERT_GT(thetas.size(), 10u);
  for (std::size_t i = 1; i < thetas.size(); ++i) {
    EXPECT_LE(thetas[i], thetas[i - 1] + 1e-12 * std::abs(thetas[i - 1])) << "t=" << i;
  }
}

TEST(SolveSubproblem, MatchesLongRunProximalGradientOnConvexModels) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto p = small_logistic(seed, 0.02);
    Rng rng(seed);
    const Vector x = random_vector(rng, p.dim(), 0.3);
    const auto m = build_model(p, x, 0.5, 2.0);  // convex quadratic model plus l1
    InnerConfig cfg;
    cfg.max_iters = 5000;
    const auto r = solve_subproblem(m, *p.g, 1e-14, cfg);  // run to the floor

    const Matrix H = full_hessian(*p.f, x);
    const double Lip = Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().maxCoeff() + m.L;
    Vector z = x;
    for (int it = 0; it < 100000; ++it) z = forward_backward_step(m, *p.g, 1.0 / Lip, z);
    EXPECT_NEAR(subproblem_objective(m, *p.g, r.y), subproblem_objective(m, *p.g, z), 1e-8);
  }
}

TEST(InnerConfig, Validation) {
  InnerConfig c;
  c.max_iters = 0;
  EXPECT_THROW(validate_inner_config(c), ConfigError);
  c = {};
  c.gamma_shrink = 1.0;
  EXPECT_THROW(validate_inner_config(c), ConfigError);
  c = {};
  c.min_tau = 0.0;
  EXPECT_THROW(validate_inner_config(c), ConfigError);
  c = {};
  c.nonmonotone_window = 0;
  EXPECT_THROW(validate_inner_config(c), ConfigError);
  EXPECT_NO_THROW(validate_inner_config(InnerConfig{}));
}
