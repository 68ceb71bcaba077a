#pragma once

#include "rkopt/error.hpp"
#include "rkopt/field.hpp"
#include "rkopt/types.hpp"

#include <cmath>
#include <cstdint>
#include <utility>

namespace rkopt {

/// Running diagonal of G_n = Σ_l g(θ_l) g(θ_l)ᵀ.
template <std::floating_point T>
struct AdaGradState {
  Vector<T> g_sq_accum;
  std::uint64_t step_count = 0;

  AdaGradState() = default;
  explicit AdaGradState(Eigen::Index dim) : g_sq_accum(Vector<T>::Zero(dim)) {}
};

template <std::floating_point T>
void accumulate(AdaGradState<T>& state, const Vector<T>& g) {
  if (g.size() != state.g_sq_accum.size()) throw InvalidArgument("dimension mismatch in accumulate");
  if (!all_finite(g)) throw InvalidArgument("cannot accumulate a non-finite gradient");
  state.g_sq_accum += g.cwiseProduct(g);
  ++state.step_count;
}

/// Diagonal of a symmetric positive-definite preconditioner A.
template <std::floating_point T>
class DiagonalPreconditioner {
 public:
  explicit DiagonalPreconditioner(Vector<T> scale) : scale_(std::move(scale)) {
    if (!all_finite(scale_) || !((scale_.array() > T(0)).all())) {
      throw InvalidArgument("preconditioner diagonal must be finite and strictly positive");
    }
  }

  static DiagonalPreconditioner identity(Eigen::Index dim) { return DiagonalPreconditioner(Vector<T>::Ones(dim)); }

  const Vector<T>& scale() const noexcept { return scale_; }
  Eigen::Index dim() const noexcept { return scale_.size(); }

  Vector<T> apply(const Vector<T>& g) const { return scale_.cwiseProduct(g); }

 private:
  Vector<T> scale_;
};

/// A_n = (ε + diag G_n)^{-1/2}.
template <std::floating_point T>
DiagonalPreconditioner<T> adagrad_preconditioner(const AdaGradState<T>& state, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("AdaGrad epsilon must be positive");
  const T e = static_cast<T>(eps);
  return DiagonalPreconditioner<T>((e + state.g_sq_accum.array()).sqrt().inverse().matrix());
}

/// A'_n = (1 + diag G_n)^{-1/2}; AdaGrad with ε pinned to 1.
template <std::floating_point T>
DiagonalPreconditioner<T> modified_adagrad_preconditioner(const AdaGradState<T>& state) {
  return adagrad_preconditioner(state, 1.0);
}

/// f(θ) = -(A ⊙ g(θ)). Zeros of f are exactly the zeros of g. Captures both
/// arguments by reference.
template <GradientOracle O>
VectorField<scalar_of<O>> preconditioned_field(const O& oracle, const DiagonalPreconditioner<scalar_of<O>>& a) {
  using T = scalar_of<O>;
  return [&oracle, &a](const Vector<T>& theta) -> Vector<T> { return -a.apply(oracle.gradient(theta)); };
}

/// (I + g gᵀ)^α g = (1 + ‖g‖²)^α g, since g is an eigenvector of I + g gᵀ.
template <std::floating_point T>
Vector<T> metric_power_apply(const Vector<T>& g, double alpha) {
  const double factor = std::pow(1.0 + squared_norm(g), alpha);
  return static_cast<T>(factor) * g;
}

}  // namespace rkopt
