#pragma once

#include "rkopt/error.hpp"

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rkopt {

/// Explicit Runge-Kutta method in Butcher form: stage matrix A (strictly lower
/// triangular) and weights b. Immutable once built.
///
/// Construction enforces shape and explicitness only. Consistency (Σb = 1) is
/// a property of the coefficients, checked by check_order_conditions; the
/// factories below always produce consistent methods.
class ButcherTableau {
 public:
  ButcherTableau(std::string name, std::vector<std::vector<double>> a,
                 std::vector<double> b, int declared_order)
      : name_(std::move(name)), b_(std::move(b)), declared_order_(declared_order) {
    const std::size_t s = b_.size();
    if (s == 0) throw InvalidArgument("tableau '" + name_ + "': no stages");
    if (declared_order_ < 1) throw InvalidArgument("tableau '" + name_ + "': declared order must be positive");
    if (a.size() != s) throw InvalidArgument("tableau '" + name_ + "': A must be s x s");
    a_.assign(s * s, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
      if (a[i].size() != s) throw InvalidArgument("tableau '" + name_ + "': A must be s x s");
      for (std::size_t j = 0; j < s; ++j) {
        const double v = a[i][j];
        if (!std::isfinite(v)) throw InvalidArgument("tableau '" + name_ + "': non-finite coefficient");
        if (j >= i && v != 0.0) {
          throw InvalidArgument("tableau '" + name_ + "': a[i][j] must vanish for j >= i (explicit methods only)");
        }
        a_[i * s + j] = v;
      }
    }
    for (double v : b_) {
      if (!std::isfinite(v)) throw InvalidArgument("tableau '" + name_ + "': non-finite weight");
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t stages() const noexcept { return b_.size(); }
  int declared_order() const noexcept { return declared_order_; }
  double a(std::size_t i, std::size_t j) const noexcept { return a_[i * stages() + j]; }
  double b(std::size_t i) const noexcept { return b_[i]; }
  std::span<const double> weights() const noexcept { return b_; }

 private:
  std::string name_;
  std::vector<double> a_;  // row-major s x s
  std::vector<double> b_;
  int declared_order_;
};

enum class StandardMethod { euler, heun, rk3, rk4 };

inline ButcherTableau make_standard(StandardMethod method) {
  switch (method) {
    case StandardMethod::euler:
      return ButcherTableau("euler", {{0.0}}, {1.0}, 1);
    case StandardMethod::heun:
      return ButcherTableau("heun", {{0.0, 0.0}, {1.0, 0.0}}, {0.5, 0.5}, 2);
    case StandardMethod::rk3:
      // Kutta's third-order method.
      return ButcherTableau("rk3",
                            {{0.0, 0.0, 0.0},
                             {0.5, 0.0, 0.0},
                             {-1.0, 2.0, 0.0}},
                            {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0}, 3);
    case StandardMethod::rk4:
      return ButcherTableau("rk4",
                            {{0.0, 0.0, 0.0, 0.0},
                             {0.5, 0.0, 0.0, 0.0},
                             {0.0, 0.5, 0.0, 0.0},
                             {0.0, 0.0, 1.0, 0.0}},
                            {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0}, 4);
  }
  throw InvalidArgument("unknown standard method");
}

inline StandardMethod parse_standard_method(std::string_view name) {
  if (name == "euler") return StandardMethod::euler;
  if (name == "heun") return StandardMethod::heun;
  if (name == "rk3") return StandardMethod::rk3;
  if (name == "rk4") return StandardMethod::rk4;
  throw InvalidArgument("unknown tableau '" + std::string(name) + "' (expected euler, heun, rk3 or rk4)");
}

inline ButcherTableau make_standard(std::string_view name) {
  return make_standard(parse_standard_method(name));
}

/// Two-stage second-order family: b = (1-α, α), a21 = 1/(2α), α in (0, 1].
/// α = 1/2 is Heun, α = 1 the midpoint method.
inline ButcherTableau make_second_order_family(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("second-order family requires 0 < alpha <= 1");
  }
  return ButcherTableau("rk2(alpha=" + std::to_string(alpha) + ")",
                        {{0.0, 0.0}, {1.0 / (2.0 * alpha), 0.0}},
                        {1.0 - alpha, alpha}, 2);
}

inline constexpr double kOrderConditionTolerance = 1e-12;

/// Algebraic order conditions: order 1 needs Σ b_i = 1, order 2 additionally
/// Σ_ij b_i a_ij = 1/2. Higher orders are verified empirically (empirical_order).
inline bool check_order_conditions(const ButcherTableau& t, int order) {
  if (order != 1 && order != 2) {
    throw Unsupported("only order conditions 1 and 2 are checked algebraically");
  }
  double sum_b = 0.0;
  for (double w : t.weights()) sum_b += w;
  if (std::abs(sum_b - 1.0) > kOrderConditionTolerance) return false;
  if (order == 1) return true;

  double sum_ba = 0.0;
  for (std::size_t i = 0; i < t.stages(); ++i) {
    for (std::size_t j = 0; j < t.stages(); ++j) sum_ba += t.b(i) * t.a(i, j);
  }
  return std::abs(sum_ba - 0.5) <= kOrderConditionTolerance;
}

}  // namespace rkopt
