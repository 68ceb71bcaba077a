#pragma once

#include "rkopt/error.hpp"
#include "rkopt/field.hpp"
#include "rkopt/harness/text.hpp"
#include "rkopt/rk_core.hpp"
#include "rkopt/tableau.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace rkopt::harness {

struct OrderCheck {
  std::string method;
  int expected_slope = 0;
  double slope = 0.0;
  bool pass = false;
};

struct OrderReport {
  std::vector<OrderCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }
};

inline const std::vector<double>& default_h_list() {
  static const std::vector<double> h{0.2, 0.1, 0.05, 0.025};
  return h;
}

/// Fits one-step error slopes on exp_decay(λ=1) from θ0 = 1 and compares each
/// with declared_order + 1.
inline OrderReport verify_orders(const std::vector<ButcherTableau>& tableaux,
                                 const std::vector<double>& h_list = default_h_list(), double tolerance = 0.3) {
  if (h_list.size() < 3) throw InvalidArgument("order verification needs at least three step sizes");
  const auto problem = AnalyticProblem::exp_decay(1.0);
  const Vector<double> theta0 = Vector<double>::Ones(1);
  OrderReport report;
  for (const auto& t : tableaux) {
    OrderCheck c;
    c.method = t.name();
    c.expected_slope = t.declared_order() + 1;
    try {
      c.slope = empirical_order(t, problem, theta0, h_list);
    } catch (const DegenerateFit&) {
      c.slope = std::numeric_limits<double>::infinity();
    }
    c.pass = std::abs(c.slope - c.expected_slope) <= tolerance;
    report.checks.push_back(c);
  }
  return report;
}

inline OrderReport verify_orders() {
  std::vector<ButcherTableau> all;
  for (auto m : {StandardMethod::euler, StandardMethod::heun, StandardMethod::rk3, StandardMethod::rk4}) {
    all.push_back(make_standard(m));
  }
  return verify_orders(all);
}

inline void print_report(const OrderReport& r, std::ostream& out) {
  for (const auto& c : r.checks) {
    out << (c.pass ? "PASS " : "FAIL ") << c.method << " slope=" << text::format_double(c.slope)
        << " expected=" << c.expected_slope << '\n';
  }
}

}  // namespace rkopt::harness
