#pragma once

#include "rkopt/error.hpp"
#include "rkopt/types.hpp"

#include <cmath>
#include <concepts>
#include <string>
#include <utility>

namespace rkopt {

/// Anything that evaluates a loss and its gradient at a flat parameter vector.
template <class O>
concept GradientOracle = requires(const O& o, const Vector<typename O::Scalar>& theta) {
  typename O::Scalar;
  { o.dim() } -> std::convertible_to<Eigen::Index>;
  { o.loss(theta) } -> std::convertible_to<double>;
  { o.gradient(theta) } -> std::convertible_to<Vector<typename O::Scalar>>;
};

/// Oracles that can also apply their Hessian exactly.
template <class O>
concept ExactHvpOracle = GradientOracle<O> &&
    requires(const O& o, const Vector<typename O::Scalar>& theta, const Vector<typename O::Scalar>& v) {
      { o.hvp(theta, v) } -> std::convertible_to<Vector<typename O::Scalar>>;
    };

template <class O>
inline constexpr bool has_exact_hvp = ExactHvpOracle<O>;

template <GradientOracle O>
using scalar_of = typename O::Scalar;

/// Closed-form test problems for the gradient flow θ̇ = -∇L(θ).
///
///   exp_decay(λ):     L = ½ λ ‖θ‖²,           flow θ0·e^{-λt}
///   quadratic(D):     L = ½ θᵀ diag(D) θ,      flow θ0_i·e^{-D_i t}
///   rosenbrock(a, b): L = (a-x)² + b(y-x²)²,   no closed form
class AnalyticProblem {
 public:
  using Scalar = double;
  enum class Kind { exp_decay, quadratic, rosenbrock };

  static AnalyticProblem exp_decay(double lambda, Eigen::Index dim = 1) {
    if (!(lambda > 0.0)) throw InvalidArgument("exp_decay requires lambda > 0");
    if (dim < 1) throw InvalidArgument("exp_decay requires dim >= 1");
    AnalyticProblem p(Kind::exp_decay);
    p.diag_ = Vector<double>::Constant(dim, lambda);
    return p;
  }

  static AnalyticProblem quadratic(Vector<double> diag) {
    if (diag.size() < 1) throw InvalidArgument("quadratic requires dim >= 1");
    if (!((diag.array() > 0.0).all())) throw InvalidArgument("quadratic requires a positive-definite diagonal");
    AnalyticProblem p(Kind::quadratic);
    p.diag_ = std::move(diag);
    return p;
  }

  static AnalyticProblem rosenbrock(double a = 1.0, double b = 100.0) {
    AnalyticProblem p(Kind::rosenbrock);
    p.a_ = a;
    p.b_ = b;
    return p;
  }

  Kind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return kind_ == Kind::rosenbrock ? 2 : diag_.size(); }
  const Vector<double>& diagonal() const noexcept { return diag_; }

  double loss(const Vector<double>& theta) const {
    check_dim(theta);
    if (kind_ == Kind::rosenbrock) {
      const double x = theta(0), y = theta(1);
      return (a_ - x) * (a_ - x) + b_ * (y - x * x) * (y - x * x);
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) acc += diag_(i) * theta(i) * theta(i);
    return 0.5 * acc;
  }

  Vector<double> gradient(const Vector<double>& theta) const {
    check_dim(theta);
    if (kind_ == Kind::rosenbrock) {
      const double x = theta(0), y = theta(1);
      Vector<double> g(2);
      g(0) = -2.0 * (a_ - x) - 4.0 * b_ * x * (y - x * x);
      g(1) = 2.0 * b_ * (y - x * x);
      return g;
    }
    return diag_.cwiseProduct(theta);
  }

  Vector<double> hvp(const Vector<double>& theta, const Vector<double>& v) const {
    check_dim(theta);
    check_dim(v);
    if (kind_ == Kind::rosenbrock) {
      const double x = theta(0), y = theta(1);
      const double hxx = 2.0 - 4.0 * b_ * (y - x * x) + 8.0 * b_ * x * x;
      const double hxy = -4.0 * b_ * x;
      const double hyy = 2.0 * b_;
      Vector<double> out(2);
      out(0) = hxx * v(0) + hxy * v(1);
      out(1) = hxy * v(0) + hyy * v(1);
      return out;
    }
    return diag_.cwiseProduct(v);
  }

 private:
  explicit AnalyticProblem(Kind kind) : kind_(kind) {}

  void check_dim(const Vector<double>& v) const {
    if (v.size() != dim()) {
      throw InvalidArgument("dimension mismatch: expected " + std::to_string(dim()) + ", got " +
                            std::to_string(v.size()));
    }
  }

  Kind kind_;
  Vector<double> diag_;
  double a_ = 1.0;
  double b_ = 100.0;
};

static_assert(ExactHvpOracle<AnalyticProblem>);

template <GradientOracle O>
double eval_loss(const O& oracle, const Vector<scalar_of<O>>& theta) {
  if (theta.size() != oracle.dim()) throw InvalidArgument("dimension mismatch in eval_loss");
  return static_cast<double>(oracle.loss(theta));
}

/// f(θ) = -g(θ). The oracle is captured by reference and must outlive the field.
template <GradientOracle O>
VectorField<scalar_of<O>> gradient_flow_field(const O& oracle) {
  return [&oracle](const Vector<scalar_of<O>>& theta) -> Vector<scalar_of<O>> {
    return -oracle.gradient(theta);
  };
}

inline Vector<double> exact_flow_solution(const AnalyticProblem& p, const Vector<double>& theta0, double t) {
  if (p.kind() == AnalyticProblem::Kind::rosenbrock) {
    throw NoClosedForm("rosenbrock gradient flow has no closed-form solution");
  }
  if (theta0.size() != p.dim()) throw InvalidArgument("dimension mismatch in exact_flow_solution");
  if (!(t >= 0.0)) throw InvalidArgument("exact_flow_solution requires t >= 0");
  return (theta0.array() * (-p.diagonal().array() * t).exp()).matrix();
}

enum class HvpMethod { exact, finite_diff };

/// δ used when a caller does not fix one: 1e-4·(1 + ‖θ‖).
template <class Derived>
double default_fd_delta(const Eigen::MatrixBase<Derived>& theta) {
  return 1e-4 * (1.0 + norm(theta));
}

/// Forward-difference H(θ)v with normalized direction, reusing a known g(θ):
/// (g(θ + δ·v/‖v‖) - g(θ))·‖v‖/δ. Costs one gradient evaluation.
template <GradientOracle O>
Vector<scalar_of<O>> finite_diff_hvp(const O& oracle, const Vector<scalar_of<O>>& theta,
                                     const Vector<scalar_of<O>>& v, double delta,
                                     const Vector<scalar_of<O>>& grad_at_theta) {
  using T = scalar_of<O>;
  const double vnorm = norm(v);
  if (!(vnorm > 0.0)) throw InvalidArgument("finite-difference HVP needs a nonzero direction");
  if (!(delta > 0.0)) throw InvalidArgument("finite-difference HVP needs delta > 0");
  const Vector<T> probe = theta + (static_cast<T>(delta / vnorm) * v);
  const Vector<T> g_probe = oracle.gradient(probe);
  return (g_probe - grad_at_theta) * static_cast<T>(vnorm / delta);
}

/// H(θ)v. delta <= 0 selects default_fd_delta(θ).
template <GradientOracle O>
Vector<scalar_of<O>> hvp(const O& oracle, const Vector<scalar_of<O>>& theta, const Vector<scalar_of<O>>& v,
                         HvpMethod method, double delta = 0.0) {
  if (theta.size() != oracle.dim() || v.size() != oracle.dim()) {
    throw InvalidArgument("dimension mismatch in hvp");
  }
  if (method == HvpMethod::exact) {
    if constexpr (has_exact_hvp<O>) {
      return oracle.hvp(theta, v);
    } else {
      throw Unsupported("oracle has no exact Hessian-vector product");
    }
  }
  if (delta <= 0.0) delta = default_fd_delta(theta);
  return finite_diff_hvp(oracle, theta, v, delta, oracle.gradient(theta));
}

/// ‖H(θ)g(θ)‖ / ‖g(θ)‖, the local rate at which the gradient turns along the flow.
/// Returns 0 at critical points.
template <GradientOracle O>
double stiffness_ratio(const O& oracle, const Vector<scalar_of<O>>& theta, HvpMethod method, double delta = 0.0) {
  const auto g = oracle.gradient(theta);
  const double gnorm = norm(g);
  if (gnorm == 0.0) return 0.0;
  return norm(hvp(oracle, theta, g, method, delta)) / gnorm;
}

}  // namespace rkopt
