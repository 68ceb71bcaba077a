#pragma once

#include "rkopt/error.hpp"
#include "rkopt/field.hpp"
#include "rkopt/precondition.hpp"
#include "rkopt/rk_core.hpp"
#include "rkopt/step_control.hpp"
#include "rkopt/tableau.hpp"
#include "rkopt/types.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace rkopt {

enum class Algorithm { vanilla_rk, rk_precond_adagrad, rk_precond_modified, rk_dalr, rk_momentum, adam, sgd_momentum };
enum class LrSchedule { constant, cosine };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::vanilla_rk: return "vanilla_rk";
    case Algorithm::rk_precond_adagrad: return "rk_precond_adagrad";
    case Algorithm::rk_precond_modified: return "rk_precond_modified";
    case Algorithm::rk_dalr: return "rk_dalr";
    case Algorithm::rk_momentum: return "rk_momentum";
    case Algorithm::adam: return "adam";
    case Algorithm::sgd_momentum: return "sgd_momentum";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (auto a : {Algorithm::vanilla_rk, Algorithm::rk_precond_adagrad, Algorithm::rk_precond_modified,
                 Algorithm::rk_dalr, Algorithm::rk_momentum, Algorithm::adam, Algorithm::sgd_momentum}) {
    if (s == to_string(a)) return a;
  }
  throw InvalidArgument("unknown optimizer algorithm '" + std::string(s) + "'");
}

inline bool is_rk(Algorithm a) { return a != Algorithm::adam && a != Algorithm::sgd_momentum; }

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Hyperparameters of one optimizer. Only the optional fields that the
/// algorithm uses may be set; validate() enforces that.
struct OptimizerSpec {
  Algorithm algorithm = Algorithm::vanilla_rk;
  double h = 0.01;
  std::optional<ButcherTableau> tableau;  // RK variants
  std::optional<double> beta;             // rk_momentum, sgd_momentum
  std::optional<AdamParams> adam;         // adam
  std::optional<DalConfig> dal;           // rk_dalr
  std::optional<double> adagrad_eps;      // rk_precond_adagrad
  LrSchedule schedule = LrSchedule::constant;

  /// Fills defaults for the fields `algorithm` requires and leaves the rest unset.
  static OptimizerSpec with_defaults(Algorithm algorithm, double h) {
    OptimizerSpec s;
    s.algorithm = algorithm;
    s.h = h;
    if (is_rk(algorithm)) s.tableau = make_standard(StandardMethod::rk4);
    if (algorithm == Algorithm::rk_momentum || algorithm == Algorithm::sgd_momentum) s.beta = 0.9;
    if (algorithm == Algorithm::adam) s.adam = AdamParams{};
    if (algorithm == Algorithm::rk_dalr) s.dal = DalConfig{};
    if (algorithm == Algorithm::rk_precond_adagrad) s.adagrad_eps = 1e-8;
    return s;
  }

  void validate() const {
    const auto need = [&](bool present, bool required, const char* field) {
      if (required && !present) {
        throw InvalidArgument(std::string(to_string(algorithm)) + " requires " + field);
      }
      if (!required && present) {
        throw InvalidArgument(std::string(field) + " is not used by " + std::string(to_string(algorithm)));
      }
    };
    need(tableau.has_value(), is_rk(algorithm), "tableau");
    need(beta.has_value(), algorithm == Algorithm::rk_momentum || algorithm == Algorithm::sgd_momentum, "beta");
    need(adam.has_value(), algorithm == Algorithm::adam, "adam parameters");
    need(dal.has_value(), algorithm == Algorithm::rk_dalr, "dal parameters");
    need(adagrad_eps.has_value(), algorithm == Algorithm::rk_precond_adagrad, "adagrad_eps");

    if (algorithm != Algorithm::rk_dalr && !(h > 0.0 && std::isfinite(h))) {
      throw InvalidArgument("learning rate h must be positive");
    }
    if (beta && !(*beta >= 0.0 && *beta < 1.0)) throw InvalidArgument("beta must lie in [0, 1)");
    if (adam) {
      if (!(adam->beta1 >= 0.0 && adam->beta1 < 1.0) || !(adam->beta2 >= 0.0 && adam->beta2 < 1.0)) {
        throw InvalidArgument("adam betas must lie in [0, 1)");
      }
      if (!(adam->eps > 0.0)) throw InvalidArgument("adam eps must be positive");
    }
    if (dal) dal->validate();
    if (adagrad_eps && !(*adagrad_eps > 0.0)) throw InvalidArgument("adagrad_eps must be positive");
    if (algorithm == Algorithm::rk_dalr && schedule != LrSchedule::constant) {
      throw InvalidArgument("rk_dalr chooses its own step size; schedules do not apply");
    }
  }
};

/// EMA of RK gradients; m_0 = 0.
template <std::floating_point T>
struct MomentumState {
  Vector<T> m;

  MomentumState() = default;
  explicit MomentumState(Eigen::Index dim) : m(Vector<T>::Zero(dim)) {}
};

template <std::floating_point T>
struct AdamState {
  Vector<T> m1;
  Vector<T> m2;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index dim) : m1(Vector<T>::Zero(dim)), m2(Vector<T>::Zero(dim)) {}
};

namespace detail {

inline void require(const OptimizerSpec& spec, bool ok, const char* fn) {
  if (!ok) throw InvalidArgument(std::string(fn) + " called with algorithm " + std::string(to_string(spec.algorithm)));
}

template <std::floating_point T>
void check_update(const Vector<T>& theta) {
  if (!all_finite(theta)) throw DivergenceError(-1, "non-finite parameters after update");
}

}  // namespace detail

/// θ' = θ - h·g*(θ, h).
template <GradientOracle O>
RkStepResult<scalar_of<O>> step_vanilla_rk(const OptimizerSpec& spec, const O& oracle,
                                           const Vector<scalar_of<O>>& theta) {
  detail::require(spec, spec.algorithm == Algorithm::vanilla_rk, "step_vanilla_rk");
  return rk_step(*spec.tableau, oracle, theta, static_cast<scalar_of<O>>(spec.h));
}

/// Preconditioned RK step. The step-start gradient is accumulated into G_n and
/// reused as the first stage; A_n stays frozen across all stages of the step.
template <GradientOracle O>
RkStepResult<scalar_of<O>> step_rk_preconditioned(const OptimizerSpec& spec, const O& oracle,
                                                  const Vector<scalar_of<O>>& theta,
                                                  AdaGradState<scalar_of<O>>& state,
                                                  std::optional<double> h_override = std::nullopt,
                                                  double* grad_norm = nullptr) {
  using T = scalar_of<O>;
  detail::require(spec,
                  spec.algorithm == Algorithm::rk_precond_adagrad || spec.algorithm == Algorithm::rk_precond_modified,
                  "step_rk_preconditioned");
  if (state.g_sq_accum.size() == 0) state = AdaGradState<T>(theta.size());
  const Vector<T> g0 = oracle.gradient(theta);
  if (!all_finite(g0)) throw DivergenceError(0, "non-finite gradient at stage 1");
  if (grad_norm) *grad_norm = norm(g0);
  accumulate(state, g0);
  const auto precond = spec.algorithm == Algorithm::rk_precond_modified
                           ? modified_adagrad_preconditioner(state)
                           : adagrad_preconditioner(state, *spec.adagrad_eps);
  const Vector<T> d0 = precond.apply(g0);
  auto direction = [&](const Vector<T>& p) { return precond.apply(oracle.gradient(p)); };
  auto r = rk_step_direction<T>(*spec.tableau, direction, theta, static_cast<T>(h_override.value_or(spec.h)), &d0);
  r.grad_evals += 1;
  return r;
}

template <std::floating_point T>
struct DalrStepResult {
  Vector<T> theta_next;
  AdaptiveRate rate;
  int grad_evals = 0;
  double grad_norm = 0.0;
};

/// RK step with h = h_DALR(θ). h is computed once from the step-start gradient
/// and used for both stage placement and the update. The step-start gradient is
/// reused as stage 1, so a finite-difference step costs stages + 1 evaluations.
template <GradientOracle O>
DalrStepResult<scalar_of<O>> step_rk_dalr(const OptimizerSpec& spec, const O& oracle,
                                          const Vector<scalar_of<O>>& theta) {
  using T = scalar_of<O>;
  detail::require(spec, spec.algorithm == Algorithm::rk_dalr, "step_rk_dalr");
  DalrStepResult<T> out;
  const Vector<T> g0 = oracle.gradient(theta);
  out.grad_evals = 1;
  if (!all_finite(g0)) throw DivergenceError(0, "non-finite gradient at stage 1");
  out.grad_norm = norm(g0);
  out.rate = dalr(oracle, theta, g0, *spec.dal);
  if (!out.rate.degenerate && spec.dal->hvp_method == HvpMethod::finite_diff) out.grad_evals += 1;
  if (!(out.rate.h > 0.0)) {
    out.theta_next = theta;
    return out;
  }
  auto r = rk_step(*spec.tableau, oracle, theta, static_cast<T>(out.rate.h), &g0);
  out.grad_evals += r.grad_evals;
  out.theta_next = std::move(r.theta_next);
  return out;
}

/// m' = β·m + g*(θ, h); θ' = θ - h·m'. No bias correction.
template <GradientOracle O>
RkStepResult<scalar_of<O>> step_rk_momentum(const OptimizerSpec& spec, const O& oracle,
                                            const Vector<scalar_of<O>>& theta, MomentumState<scalar_of<O>>& state,
                                            std::optional<double> h_override = std::nullopt) {
  using T = scalar_of<O>;
  detail::require(spec, spec.algorithm == Algorithm::rk_momentum, "step_rk_momentum");
  if (state.m.size() == 0) state = MomentumState<T>(theta.size());
  const T h = static_cast<T>(h_override.value_or(spec.h));
  const T beta = static_cast<T>(*spec.beta);
  auto r = rk_step(*spec.tableau, oracle, theta, h);
  state.m = beta * state.m + r.rk_gradient;
  r.theta_next = theta - h * state.m;
  detail::check_update(r.theta_next);
  return r;
}

/// Heavy-ball SGD: m' = β·m + g(θ); θ' = θ - h·m'.
template <GradientOracle O>
Vector<scalar_of<O>> step_sgd_momentum(const OptimizerSpec& spec, const O& oracle, const Vector<scalar_of<O>>& theta,
                                       MomentumState<scalar_of<O>>& state,
                                       std::optional<double> h_override = std::nullopt,
                                       double* grad_norm = nullptr) {
  using T = scalar_of<O>;
  detail::require(spec, spec.algorithm == Algorithm::sgd_momentum, "step_sgd_momentum");
  if (state.m.size() == 0) state = MomentumState<T>(theta.size());
  const T h = static_cast<T>(h_override.value_or(spec.h));
  const T beta = static_cast<T>(*spec.beta);
  const Vector<T> g = oracle.gradient(theta);
  if (grad_norm) *grad_norm = norm(g);
  state.m = beta * state.m + g;
  Vector<T> next = theta - h * state.m;
  detail::check_update(next);
  return next;
}

/// Adam with bias correction.
template <GradientOracle O>
Vector<scalar_of<O>> step_adam(const OptimizerSpec& spec, const O& oracle, const Vector<scalar_of<O>>& theta,
                               AdamState<scalar_of<O>>& state, std::optional<double> h_override = std::nullopt,
                               double* grad_norm = nullptr) {
  using T = scalar_of<O>;
  detail::require(spec, spec.algorithm == Algorithm::adam, "step_adam");
  if (state.m1.size() == 0) state = AdamState<T>(theta.size());
  const auto& p = *spec.adam;
  const Vector<T> g = oracle.gradient(theta);
  if (grad_norm) *grad_norm = norm(g);
  const T b1 = static_cast<T>(p.beta1), b2 = static_cast<T>(p.beta2);
  state.m1 = b1 * state.m1 + (T(1) - b1) * g;
  state.m2 = b2 * state.m2 + (T(1) - b2) * g.cwiseProduct(g);
  ++state.t;
  const double t = static_cast<double>(state.t);
  const T c1 = static_cast<T>(1.0 - std::pow(p.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(p.beta2, t));
  const T h = static_cast<T>(h_override.value_or(spec.h));
  const T eps = static_cast<T>(p.eps);
  Vector<T> next =
      theta - (h * (state.m1.array() / c1) / ((state.m2.array() / c2).sqrt() + eps)).matrix();
  detail::check_update(next);
  return next;
}

/// Learning rate at 0-based step k of `total` under the spec's schedule.
inline double scheduled_lr(const OptimizerSpec& spec, std::size_t k, std::size_t total) {
  if (spec.schedule == LrSchedule::constant || total == 0) return spec.h;
  const double frac = static_cast<double>(k) / static_cast<double>(total);
  return spec.h * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

/// Gradient evaluations one step of `spec` performs on a non-degenerate point.
inline int grad_evals_per_step(const OptimizerSpec& spec) {
  if (!is_rk(spec.algorithm)) return 1;
  const int s = static_cast<int>(spec.tableau->stages());
  if (spec.algorithm == Algorithm::rk_dalr && spec.dal->hvp_method == HvpMethod::finite_diff) return s + 1;
  return s;
}

struct StepReport {
  double lr_effective = 0.0;
  double grad_norm = 0.0;  // ‖g(θ)‖ at the step start
  int grad_evals = 0;
  bool degenerate = false;
};

/// Stateful driver dispatching to the step functions above.
template <std::floating_point T>
class Optimizer {
 public:
  Optimizer(OptimizerSpec spec, Eigen::Index dim) : spec_(std::move(spec)) {
    spec_.validate();
    switch (spec_.algorithm) {
      case Algorithm::rk_precond_adagrad:
      case Algorithm::rk_precond_modified: state_ = AdaGradState<T>(dim); break;
      case Algorithm::rk_momentum:
      case Algorithm::sgd_momentum: state_ = MomentumState<T>(dim); break;
      case Algorithm::adam: state_ = AdamState<T>(dim); break;
      default: break;
    }
  }

  const OptimizerSpec& spec() const noexcept { return spec_; }

  /// Advances θ in place by one step. k is the 0-based step index and total
  /// the planned step count (used only by the cosine schedule).
  template <GradientOracle O>
    requires std::same_as<scalar_of<O>, T>
  StepReport step(const O& oracle, Vector<T>& theta, std::size_t k = 0, std::size_t total = 0) {
    StepReport rep;
    const double h = scheduled_lr(spec_, k, total);
    rep.lr_effective = h;
    switch (spec_.algorithm) {
      case Algorithm::vanilla_rk: {
        auto r = rk_step(*spec_.tableau, oracle, theta, static_cast<T>(h));
        rep.grad_norm = norm(r.stage_gradients.front());
        rep.grad_evals = r.grad_evals;
        theta = std::move(r.theta_next);
        break;
      }
      case Algorithm::rk_precond_adagrad:
      case Algorithm::rk_precond_modified: {
        auto& st = std::get<AdaGradState<T>>(state_);
        auto r = step_rk_preconditioned(spec_, oracle, theta, st, h, &rep.grad_norm);
        rep.grad_evals = r.grad_evals;
        theta = std::move(r.theta_next);
        break;
      }
      case Algorithm::rk_dalr: {
        auto r = step_rk_dalr(spec_, oracle, theta);
        rep.lr_effective = r.rate.h;
        rep.degenerate = r.rate.degenerate;
        rep.grad_norm = r.grad_norm;
        rep.grad_evals = r.grad_evals;
        theta = std::move(r.theta_next);
        break;
      }
      case Algorithm::rk_momentum: {
        auto r = step_rk_momentum(spec_, oracle, theta, std::get<MomentumState<T>>(state_), h);
        rep.grad_norm = norm(r.stage_gradients.front());
        rep.grad_evals = r.grad_evals;
        theta = std::move(r.theta_next);
        break;
      }
      case Algorithm::sgd_momentum:
        theta = step_sgd_momentum(spec_, oracle, theta, std::get<MomentumState<T>>(state_), h, &rep.grad_norm);
        rep.grad_evals = 1;
        break;
      case Algorithm::adam:
        theta = step_adam(spec_, oracle, theta, std::get<AdamState<T>>(state_), h, &rep.grad_norm);
        rep.grad_evals = 1;
        break;
    }
    return rep;
  }

 private:
  OptimizerSpec spec_;
  std::variant<std::monostate, AdaGradState<T>, MomentumState<T>, AdamState<T>> state_;
};

}  // namespace rkopt
