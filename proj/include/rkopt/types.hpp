#pragma once

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>

namespace rkopt {

template <std::floating_point T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <std::floating_point T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// θ ↦ f(θ) for an autonomous ODE θ̇ = f(θ).
template <std::floating_point T>
using VectorField = std::function<Vector<T>(const Vector<T>&)>;

/// Squared Euclidean norm accumulated in double regardless of storage type.
template <class Derived>
double squared_norm(const Eigen::MatrixBase<Derived>& v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = static_cast<double>(v(i));
    acc += x * x;
  }
  return acc;
}

template <class Derived>
double norm(const Eigen::MatrixBase<Derived>& v) {
  return std::sqrt(squared_norm(v));
}

template <class DerivedA, class DerivedB>
double dot(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a(i)) * static_cast<double>(b(i));
  }
  return acc;
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

}  // namespace rkopt
