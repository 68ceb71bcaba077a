#include "rkopt/rk_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

using namespace rkopt;

namespace {

Vector<double> scalar(double x) { return Vector<double>::Constant(1, x); }

// Counts gradient calls and can be told to emit NaN at a chosen call.
struct ProbeOracle {
  using Scalar = double;
  AnalyticProblem inner = AnalyticProblem::quadratic(Vector<double>::Ones(1));
  mutable int calls = 0;
  int nan_at_call = -1;
  Eigen::Index dim() const { return inner.dim(); }
  double loss(const Vector<double>& t) const { return inner.loss(t); }
  Vector<double> gradient(const Vector<double>& t) const {
    const int c = calls++;
    if (c == nan_at_call) return Vector<double>::Constant(t.size(), std::numeric_limits<double>::quiet_NaN());
    return inner.gradient(t);
  }
};

// Horner evaluation of Σ_{k≤n} (-z)^k / k!, the degree-n Taylor polynomial of e^{-z}.
double taylor_exp_neg(double z, int n) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= n; ++k) {
    term *= -z / k;
    sum += term;
  }
  return sum;
}

const std::vector<double> kHs{0.2, 0.1, 0.05, 0.025};

}  // namespace

TEST(StagePoints, EulerSingleStage) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(3));
  const Vector<double> theta = Vector<double>::LinSpaced(3, -1.0, 2.0);
  const auto pts = stage_points(make_standard(StandardMethod::euler), gradient_flow_field(q), theta, 0.3);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0], theta);
}

TEST(StagePoints, HeunLinearDecay) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(1));
  const auto pts = stage_points(make_standard(StandardMethod::heun), gradient_flow_field(q), scalar(1.0), 0.1);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0](0), 1.0);
  EXPECT_DOUBLE_EQ(pts[1](0), 0.9);
}

TEST(StagePoints, Rk4LinearDecay) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(1));
  const auto pts = stage_points(make_standard(StandardMethod::rk4), gradient_flow_field(q), scalar(1.0), 1.0);
  ASSERT_EQ(pts.size(), 4u);
  const double expected[] = {1.0, 0.5, 0.75, 0.25};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(pts[i](0), expected[i]) << i;
}

TEST(StagePoints, EvaluatesFieldExactlyStagesTimes) {
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    const auto t = make_standard(m);
    int calls = 0;
    VectorField<double> f = [&](const Vector<double>& x) {
      ++calls;
      return Vector<double>(-x);
    };
    stage_points(t, f, scalar(1.0), 0.1);
    EXPECT_EQ(calls, static_cast<int>(t.stages())) << t.name();
  }
}

TEST(StagePoints, NonFiniteFieldReportsStage) {
  const auto t = make_standard(StandardMethod::rk4);
  int calls = 0;
  VectorField<double> f = [&](const Vector<double>& x) {
    return ++calls == 3 ? Vector<double>::Constant(1, std::numeric_limits<double>::infinity()) : Vector<double>(-x);
  };
  try {
    stage_points(t, f, scalar(1.0), 0.1);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.stage(), 2);
  }
}

TEST(StagePoints, RejectsNonPositiveStep) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(1));
  const auto t = make_standard(StandardMethod::rk4);
  EXPECT_THROW(stage_points(t, gradient_flow_field(q), scalar(1.0), 0.0), InvalidArgument);
  EXPECT_THROW(stage_points(t, gradient_flow_field(q), scalar(1.0), -0.1), InvalidArgument);
}

TEST(RkGradient, Rk4QuadraticExample) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(1));
  const auto r = rk_step(make_standard(StandardMethod::rk4), q, scalar(1.0), 1.0);
  const double grads[] = {1.0, 0.5, 0.75, 0.25};
  ASSERT_EQ(r.stage_gradients.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(r.stage_gradients[i](0), grads[i]);
  EXPECT_NEAR(r.rk_gradient(0), 0.625, 1e-15);
  EXPECT_NEAR(rk_gradient(make_standard(StandardMethod::rk4), q, scalar(1.0), 1.0)(0), 0.625, 1e-15);
}

TEST(RkGradient, CriticalPointGivesZero) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Constant(2, 2.0));
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    EXPECT_EQ(rk_gradient(make_standard(m), q, Vector<double>::Zero(2), 0.7).norm(), 0.0);
  }
}

TEST(RkGradient, EulerIsRawGradient) {
  const auto r = AnalyticProblem::rosenbrock();
  Vector<double> theta(2);
  theta << -0.7, 0.4;
  for (double h : {1e-4, 0.01, 0.5}) {
    EXPECT_EQ(rk_gradient(make_standard(StandardMethod::euler), r, theta, h), r.gradient(theta));
  }
}

TEST(RkGradient, MatchesStagePointsOnNegatedField) {
  const auto r = AnalyticProblem::rosenbrock(1.0, 5.0);
  Vector<double> theta(2);
  theta << 0.2, -0.3;
  const auto t = make_standard(StandardMethod::rk3);
  const double h = 0.05;
  const auto pts = stage_points(t, gradient_flow_field(r), theta, h);
  Vector<double> expected = Vector<double>::Zero(2);
  for (std::size_t i = 0; i < t.stages(); ++i) expected += t.b(i) * r.gradient(pts[i]);
  const auto step = rk_step(t, r, theta, h);
  EXPECT_LE((step.rk_gradient - expected).norm(), 1e-14);
  for (std::size_t i = 0; i < t.stages(); ++i) EXPECT_LE((step.stage_points[i] - pts[i]).norm(), 1e-15);
}

TEST(RkStep, Rk4MatchesTaylorPolynomial) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(1));
  const auto r = rk_step(make_standard(StandardMethod::rk4), q, scalar(1.0), 1.0);
  EXPECT_NEAR(r.theta_next(0), taylor_exp_neg(1.0, 4), 1e-12);
  EXPECT_NEAR(r.theta_next(0), 0.375, 1e-12);
}

TEST(RkStep, TaylorPolynomialForEveryStandardMethod) {
  // On θ' = -λθ a method of order k whose stage count equals k reproduces the
  // degree-k Taylor polynomial of e^{-λh}.
  const auto e = AnalyticProblem::exp_decay(1.3);
  const int order[] = {1, 2, 3, 4};
  const StandardMethod methods[] = {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3,
                                    StandardMethod::rk4};
  for (int m = 0; m < 4; ++m) {
    for (double h : {0.05, 0.3, 1.0}) {
      const auto r = rk_step(make_standard(methods[m]), e, scalar(2.0), h);
      EXPECT_NEAR(r.theta_next(0), 2.0 * taylor_exp_neg(1.3 * h, order[m]), 1e-12) << m << " h=" << h;
    }
  }
}

TEST(RkStep, HeunExample) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(1));
  const auto r = rk_step(make_standard(StandardMethod::heun), q, scalar(1.0), 0.1);
  EXPECT_NEAR(r.theta_next(0), 0.905, 1e-15);
  EXPECT_NEAR(std::abs(r.theta_next(0) - std::exp(-0.1)), 1.6e-4, 1e-5);
}

TEST(RkStep, FixedPointPreserved) {
  const auto r = AnalyticProblem::rosenbrock();
  const auto step = rk_step(make_standard(StandardMethod::rk4), r, Vector<double>::Ones(2), 0.01);
  EXPECT_EQ(step.theta_next, Vector<double>::Ones(2));
}

TEST(RkStep, RecordsStagesAndReconstructsUpdate) {
  const auto r = AnalyticProblem::rosenbrock(1.0, 3.0);
  Vector<double> theta(2);
  theta << 0.1, 0.8;
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    const auto t = make_standard(m);
    const double h = 0.01;
    const auto s = rk_step(t, r, theta, h);
    EXPECT_EQ(s.stage_points.size(), t.stages());
    EXPECT_EQ(s.stage_gradients.size(), t.stages());
    EXPECT_EQ(s.grad_evals, static_cast<int>(t.stages()));
    const Vector<double> rebuilt = theta - h * s.rk_gradient;
    EXPECT_EQ(s.theta_next, rebuilt) << t.name();
  }
}

TEST(RkStep, GradientEvaluationCountEqualsStages) {
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    ProbeOracle o;
    rk_step(make_standard(m), o, scalar(1.0), 0.1);
    EXPECT_EQ(o.calls, static_cast<int>(make_standard(m).stages()));
  }
}

TEST(RkStep, SuppliedFirstGradientIsReused) {
  ProbeOracle o;
  const Vector<double> g0 = o.inner.gradient(scalar(1.0));
  const auto s = rk_step(make_standard(StandardMethod::rk4), o, scalar(1.0), 0.1, &g0);
  EXPECT_EQ(o.calls, 3);
  EXPECT_EQ(s.grad_evals, 3);
  ProbeOracle fresh;
  EXPECT_EQ(rk_step(make_standard(StandardMethod::rk4), fresh, scalar(1.0), 0.1).theta_next, s.theta_next);
}

TEST(RkStep, DivergenceCarriesStageIndex) {
  for (int bad = 0; bad < 4; ++bad) {
    ProbeOracle o;
    o.nan_at_call = bad;
    try {
      rk_step(make_standard(StandardMethod::rk4), o, scalar(1.0), 0.1);
      FAIL() << "expected divergence at stage " << bad;
    } catch (const DivergenceError& e) {
      EXPECT_EQ(e.stage(), bad);
    }
  }
}

TEST(RkStep, OverflowingUpdateDiverges) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Constant(1, 1e300));
  EXPECT_THROW(rk_step(make_standard(StandardMethod::euler), q, scalar(1e10), 1e300), DivergenceError);
}

TEST(RkStep, DimensionMismatchRejected) {
  const auto q = AnalyticProblem::quadratic(Vector<double>::Ones(2));
  EXPECT_THROW(rk_step(make_standard(StandardMethod::rk4), q, scalar(1.0), 0.1), InvalidArgument);
}

TEST(RkStep, Deterministic) {
  const auto r = AnalyticProblem::rosenbrock();
  Vector<double> theta(2);
  theta << -1.1, 0.6;
  const auto a = rk_step(make_standard(StandardMethod::rk4), r, theta, 1e-3);
  const auto b = rk_step(make_standard(StandardMethod::rk4), r, theta, 1e-3);
  EXPECT_EQ(std::memcmp(a.theta_next.data(), b.theta_next.data(), sizeof(double) * 2), 0);
  EXPECT_EQ(std::memcmp(a.rk_gradient.data(), b.rk_gradient.data(), sizeof(double) * 2), 0);
}

TEST(RkGradient, ApproachesGradientLinearlyInH) {
  const auto q = AnalyticProblem::quadratic((Vector<double>(3) << 0.5, 1.0, 2.0).finished());
  const Vector<double> theta = Vector<double>::Ones(3);
  const Vector<double> g = q.gradient(theta);
  for (auto m : {StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    std::vector<double> xs, ys;
    for (double h : {0.1, 0.05, 0.025, 0.0125}) {
      xs.push_back(std::log(h));
      ys.push_back(std::log((rk_gradient(make_standard(m), q, theta, h) - g).norm()));
    }
    const double slope = (ys.back() - ys.front()) / (xs.back() - xs.front());
    EXPECT_NEAR(slope, 1.0, 0.05) << make_standard(m).name();
  }
}

TEST(RkStep, Rk4ContractsMonotonicallyInsideStabilityInterval) {
  for (double hl : {0.1, 1.0, 2.0, 2.7}) {
    const auto e = AnalyticProblem::exp_decay(1.0);
    Vector<double> theta = scalar(1.0);
    double prev = 1.0;
    for (int k = 0; k < 200; ++k) {
      theta = rk_step(make_standard(StandardMethod::rk4), e, theta, hl).theta_next;
      EXPECT_LT(std::abs(theta(0)), prev) << "hλ=" << hl << " step " << k;
      prev = std::abs(theta(0));
      if (prev < 1e-300) break;
    }
  }
}

TEST(EmpiricalOrder, StandardMethodSlopes) {
  const auto e = AnalyticProblem::exp_decay(1.0);
  const double expected[] = {2.0, 3.0, 4.0, 5.0};
  const double tol[] = {0.2, 0.2, 0.3, 0.3};
  int i = 0;
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    EXPECT_NEAR(empirical_order(make_standard(m), e, scalar(1.0), kHs), expected[i], tol[i]);
    ++i;
  }
}

TEST(EmpiricalOrder, SecondOrderFamilySlopes) {
  const auto e = AnalyticProblem::exp_decay(1.0);
  for (double alpha : {0.25, 0.5, 2.0 / 3.0, 1.0}) {
    EXPECT_NEAR(empirical_order(make_second_order_family(alpha), e, scalar(1.0), kHs), 3.0, 0.2) << alpha;
  }
}

TEST(EmpiricalOrder, InconsistentTableauHasSlopeOne) {
  const ButcherTableau bad("rk4-tampered", {{0, 0, 0, 0}, {0.5, 0, 0, 0}, {0, 0.5, 0, 0}, {0, 0, 1, 0}},
                           {1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6 + 0.1}, 4);
  EXPECT_NEAR(empirical_order(bad, AnalyticProblem::exp_decay(1.0), scalar(1.0), kHs), 1.0, 0.3);
}

TEST(EmpiricalOrder, Errors) {
  const auto e = AnalyticProblem::exp_decay(1.0);
  const auto t = make_standard(StandardMethod::rk4);
  const std::vector<double> two{0.2, 0.1};
  EXPECT_THROW(empirical_order(t, e, scalar(1.0), two), InvalidArgument);
  // θ0 = 0 is a fixed point of both the method and the flow: zero error.
  EXPECT_THROW(empirical_order(t, e, scalar(0.0), kHs), DegenerateFit);
  EXPECT_THROW(empirical_order(t, AnalyticProblem::rosenbrock(), Vector<double>::Zero(2), kHs), NoClosedForm);
}
