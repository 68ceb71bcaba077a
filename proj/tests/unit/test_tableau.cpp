#include "rkopt/tableau.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rkopt;

namespace {

// Σ_i b_i and Σ_ij b_i a_ij computed here independently of check_order_conditions.
double weight_sum(const ButcherTableau& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.stages(); ++i) s += t.b(i);
  return s;
}

double second_order_sum(const ButcherTableau& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.stages(); ++i) {
    for (std::size_t j = 0; j < t.stages(); ++j) s += t.b(i) * t.a(i, j);
  }
  return s;
}

}  // namespace

TEST(Tableau, EulerCoefficients) {
  const auto t = make_standard(StandardMethod::euler);
  EXPECT_EQ(t.stages(), 1u);
  EXPECT_EQ(t.declared_order(), 1);
  EXPECT_EQ(t.b(0), 1.0);
  EXPECT_EQ(t.a(0, 0), 0.0);
}

TEST(Tableau, HeunCoefficients) {
  const auto t = make_standard(StandardMethod::heun);
  EXPECT_EQ(t.stages(), 2u);
  EXPECT_EQ(t.declared_order(), 2);
  EXPECT_EQ(t.b(0), 0.5);
  EXPECT_EQ(t.b(1), 0.5);
  EXPECT_EQ(t.a(1, 0), 1.0);
}

TEST(Tableau, Rk3Coefficients) {
  const auto t = make_standard(StandardMethod::rk3);
  EXPECT_EQ(t.stages(), 3u);
  EXPECT_EQ(t.declared_order(), 3);
  EXPECT_EQ(t.a(1, 0), 0.5);
  EXPECT_EQ(t.a(2, 0), -1.0);
  EXPECT_EQ(t.a(2, 1), 2.0);
  EXPECT_DOUBLE_EQ(t.b(0), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(t.b(1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.b(2), 1.0 / 6.0);
}

TEST(Tableau, Rk4Coefficients) {
  const auto t = make_standard(StandardMethod::rk4);
  EXPECT_EQ(t.stages(), 4u);
  EXPECT_EQ(t.declared_order(), 4);
  EXPECT_DOUBLE_EQ(t.b(0), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(t.b(1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.b(2), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.b(3), 1.0 / 6.0);
  EXPECT_EQ(t.a(1, 0), 0.5);
  EXPECT_EQ(t.a(2, 1), 0.5);
  EXPECT_EQ(t.a(3, 2), 1.0);
  EXPECT_EQ(t.a(2, 0), 0.0);
  EXPECT_EQ(t.a(3, 0), 0.0);
  EXPECT_EQ(t.a(3, 1), 0.0);
}

TEST(Tableau, LookupByName) {
  for (const char* name : {"euler", "heun", "rk3", "rk4"}) EXPECT_EQ(make_standard(name).name(), name);
  EXPECT_THROW(make_standard("rk5"), InvalidArgument);
  EXPECT_THROW(make_standard(""), InvalidArgument);
}

TEST(Tableau, SecondOrderFamilyAtHalfIsHeun) {
  const auto f = make_second_order_family(0.5);
  const auto h = make_standard(StandardMethod::heun);
  ASSERT_EQ(f.stages(), h.stages());
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(f.b(i), h.b(i));
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(f.a(i, j), h.a(i, j));
  }
  EXPECT_EQ(f.declared_order(), 2);
}

TEST(Tableau, SecondOrderFamilyAtOneIsMidpoint) {
  const auto f = make_second_order_family(1.0);
  EXPECT_EQ(f.b(0), 0.0);
  EXPECT_EQ(f.b(1), 1.0);
  EXPECT_EQ(f.a(1, 0), 0.5);
}

TEST(Tableau, SecondOrderFamilyRejectsOutOfRange) {
  EXPECT_THROW(make_second_order_family(0.0), InvalidArgument);
  EXPECT_THROW(make_second_order_family(-0.3), InvalidArgument);
  EXPECT_THROW(make_second_order_family(1.0000001), InvalidArgument);
  EXPECT_THROW(make_second_order_family(std::nan("")), InvalidArgument);
}

TEST(Tableau, OrderConditionExamples) {
  EXPECT_TRUE(check_order_conditions(make_standard(StandardMethod::heun), 2));
  EXPECT_FALSE(check_order_conditions(make_standard(StandardMethod::euler), 2));
  EXPECT_TRUE(check_order_conditions(make_standard(StandardMethod::euler), 1));
  EXPECT_TRUE(check_order_conditions(make_standard(StandardMethod::rk4), 2));
  EXPECT_NEAR(second_order_sum(make_standard(StandardMethod::rk4)), 0.5, 1e-15);
}

TEST(Tableau, OrderConditionRejectsOtherOrders) {
  const auto t = make_standard(StandardMethod::rk4);
  EXPECT_THROW(check_order_conditions(t, 0), Unsupported);
  EXPECT_THROW(check_order_conditions(t, 3), Unsupported);
}

TEST(Tableau, AllStandardSatisfyFirstAndSecondOrder) {
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    const auto t = make_standard(m);
    EXPECT_LE(std::abs(weight_sum(t) - 1.0), 1e-12) << t.name();
    EXPECT_TRUE(check_order_conditions(t, 1)) << t.name();
    if (m != StandardMethod::euler) {
      EXPECT_LE(std::abs(second_order_sum(t) - 0.5), 1e-12) << t.name();
      EXPECT_TRUE(check_order_conditions(t, 2)) << t.name();
    }
  }
}

TEST(Tableau, FamilyGridPassesBothConditions) {
  for (int k = 1; k <= 100; ++k) {
    const double alpha = k / 100.0;
    const auto t = make_second_order_family(alpha);
    EXPECT_TRUE(check_order_conditions(t, 1)) << alpha;
    EXPECT_TRUE(check_order_conditions(t, 2)) << alpha;
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double alpha = u(rng);
    EXPECT_TRUE(check_order_conditions(make_second_order_family(alpha), 2)) << alpha;
  }
}

TEST(Tableau, ConstructedTableauxAreStrictlyLowerTriangular) {
  std::vector<ButcherTableau> all;
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    all.push_back(make_standard(m));
  }
  all.push_back(make_second_order_family(0.3));
  for (const auto& t : all) {
    for (std::size_t i = 0; i < t.stages(); ++i) {
      for (std::size_t j = i; j < t.stages(); ++j) EXPECT_EQ(t.a(i, j), 0.0) << t.name();
    }
  }
}

TEST(Tableau, ConstructorRejectsImplicitOrMalformed) {
  EXPECT_THROW(ButcherTableau("implicit", {{0.5}}, {1.0}, 1), InvalidArgument);
  EXPECT_THROW(ButcherTableau("diag", {{0.0, 0.0}, {0.5, 0.5}}, {0.5, 0.5}, 2), InvalidArgument);
  EXPECT_THROW(ButcherTableau("shape", {{0.0}}, {0.5, 0.5}, 1), InvalidArgument);
  EXPECT_THROW(ButcherTableau("ragged", {{0.0, 0.0}, {1.0}}, {0.5, 0.5}, 2), InvalidArgument);
  EXPECT_THROW(ButcherTableau("empty", {}, {}, 1), InvalidArgument);
  EXPECT_THROW(ButcherTableau("order", {{0.0}}, {1.0}, 0), InvalidArgument);
  EXPECT_THROW(ButcherTableau("nan", {{0.0, 0.0}, {std::nan(""), 0.0}}, {0.5, 0.5}, 2), InvalidArgument);
}

TEST(Tableau, InconsistentWeightsFailOrderOne) {
  // Constructible (explicit, well-shaped) but not consistent.
  const ButcherTableau t("bad", {{0.0, 0.0}, {1.0, 0.0}}, {0.5, 0.4}, 2);
  EXPECT_FALSE(check_order_conditions(t, 1));
  EXPECT_FALSE(check_order_conditions(t, 2));
}
