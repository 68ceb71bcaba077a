#pragma once

#include "rkopt/error.hpp"
#include "rkopt/field.hpp"
#include "rkopt/tableau.hpp"
#include "rkopt/types.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rkopt {

/// One explicit RK step in descent form.
///
/// `stage_gradients` holds the descent direction evaluated at each stage point:
/// the raw gradient for vanilla updates, A·g for preconditioned ones.
template <std::floating_point T>
struct RkStepResult {
  Vector<T> theta_next;
  Vector<T> rk_gradient;
  std::vector<Vector<T>> stage_points;
  std::vector<Vector<T>> stage_gradients;
  int grad_evals = 0;
};

namespace detail {

/// Sequential stage recursion θ_i = θ + sign·h·Σ_{j<i} a_ij v_j, v_i = eval(θ_i).
/// If `first_value` is given it is used as v_1 without calling eval.
template <std::floating_point T, class Eval>
int run_stages(const ButcherTableau& t, Eval&& eval, const Vector<T>& theta, T h, T sign,
               const Vector<T>* first_value, std::vector<Vector<T>>& points,
               std::vector<Vector<T>>& values) {
  const std::size_t s = t.stages();
  points.clear();
  values.clear();
  points.reserve(s);
  values.reserve(s);
  int evals = 0;
  for (std::size_t i = 0; i < s; ++i) {
    Vector<T> point = theta;
    if (i > 0) {
      Vector<T> acc = Vector<T>::Zero(theta.size());
      bool any = false;
      for (std::size_t j = 0; j < i; ++j) {
        const double aij = t.a(i, j);
        if (aij == 0.0) continue;
        acc += static_cast<T>(aij) * values[j];
        any = true;
      }
      if (any) point = theta + (sign * h) * acc;
      if (!all_finite(point)) {
        throw DivergenceError(static_cast<int>(i), "non-finite stage point at stage " + std::to_string(i + 1));
      }
    }
    Vector<T> value;
    if (i == 0 && first_value != nullptr) {
      value = *first_value;
    } else {
      value = eval(point);
      ++evals;
    }
    if (!all_finite(value)) {
      throw DivergenceError(static_cast<int>(i), "non-finite field value at stage " + std::to_string(i + 1));
    }
    points.push_back(std::move(point));
    values.push_back(std::move(value));
  }
  return evals;
}

template <std::floating_point T>
Vector<T> weighted_sum(const ButcherTableau& t, const std::vector<Vector<T>>& values) {
  Vector<T> out = Vector<T>::Zero(values.front().size());
  for (std::size_t i = 0; i < t.stages(); ++i) {
    const double bi = t.b(i);
    if (bi == 0.0) continue;
    out += static_cast<T>(bi) * values[i];
  }
  return out;
}

template <std::floating_point T>
void check_step_size(T h) {
  if (!(h > T(0)) || !std::isfinite(static_cast<double>(h))) {
    throw InvalidArgument("step size h must be positive and finite");
  }
}

}  // namespace detail

/// Stage points for θ̇ = f(θ): θ_1 = θ, θ_i = θ + h·Σ_{j<i} a_ij f(θ_j).
/// Performs exactly `stages` field evaluations.
template <std::floating_point T>
std::vector<Vector<T>> stage_points(const ButcherTableau& t, const VectorField<T>& f, const Vector<T>& theta, T h) {
  detail::check_step_size(h);
  std::vector<Vector<T>> points, values;
  detail::run_stages<T>(t, f, theta, h, T(1), nullptr, points, values);
  return points;
}

/// One RK step for a descent direction d(θ) (gradient or preconditioned gradient):
/// θ_i = θ - h·Σ a_ij d(θ_j), g* = Σ b_i d(θ_i), θ' = θ - h·g*.
/// `first_direction`, when supplied, is d(θ) already evaluated by the caller.
template <std::floating_point T, class Direction>
RkStepResult<T> rk_step_direction(const ButcherTableau& t, Direction&& direction, const Vector<T>& theta, T h,
                                  const Vector<T>* first_direction = nullptr) {
  detail::check_step_size(h);
  RkStepResult<T> r;
  r.grad_evals = detail::run_stages<T>(t, direction, theta, h, T(-1), first_direction, r.stage_points,
                                       r.stage_gradients);
  r.rk_gradient = detail::weighted_sum(t, r.stage_gradients);
  r.theta_next = theta - h * r.rk_gradient;
  if (!all_finite(r.theta_next)) throw DivergenceError(-1, "non-finite parameters after RK update");
  return r;
}

/// Vanilla RK step on the gradient flow of `oracle`.
template <GradientOracle O>
RkStepResult<scalar_of<O>> rk_step(const ButcherTableau& t, const O& oracle, const Vector<scalar_of<O>>& theta,
                                   scalar_of<O> h, const Vector<scalar_of<O>>* grad_at_theta = nullptr) {
  using T = scalar_of<O>;
  if (theta.size() != oracle.dim()) throw InvalidArgument("dimension mismatch in rk_step");
  return rk_step_direction<T>(
      t, [&oracle](const Vector<T>& p) { return Vector<T>(oracle.gradient(p)); }, theta, h, grad_at_theta);
}

/// g*(θ, h) = Σ b_i g(θ_i).
template <GradientOracle O>
Vector<scalar_of<O>> rk_gradient(const ButcherTableau& t, const O& oracle, const Vector<scalar_of<O>>& theta,
                                 scalar_of<O> h) {
  return rk_step(t, oracle, theta, h).rk_gradient;
}

/// Least-squares slope of log(one-step error) against log(h). A method of
/// order k gives a slope near k + 1.
inline double empirical_order(const ButcherTableau& t, const AnalyticProblem& p, const Vector<double>& theta0,
                              std::span<const double> h_list) {
  if (h_list.size() < 3) throw InvalidArgument("empirical_order needs at least three step sizes");
  std::vector<double> xs, ys;
  xs.reserve(h_list.size());
  ys.reserve(h_list.size());
  for (double h : h_list) {
    const auto step = rk_step(t, p, theta0, h);
    const double err = norm(step.theta_next - exact_flow_solution(p, theta0, h));
    if (err == 0.0) throw DegenerateFit("one-step error is exactly zero at h = " + std::to_string(h));
    xs.push_back(std::log(h));
    ys.push_back(std::log(err));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("empirical_order needs distinct step sizes");
  return sxy / sxx;
}

}  // namespace rkopt
