#pragma once

#include "rkopt/error.hpp"
#include "rkopt/field.hpp"
#include "rkopt/types.hpp"

#include <cmath>

namespace rkopt {

struct DalConfig {
  double p = 1.0;
  double c = 1.0;  // DALR cap
  HvpMethod hvp_method = HvpMethod::finite_diff;
  double delta = 0.0;  // finite-difference scale; <= 0 means default_fd_delta(θ)
  double fallback_h = 0.0;

  void validate() const {
    if (!(p > 0.0)) throw InvalidArgument("DAL exponent p must be positive");
    if (!(c > 0.0)) throw InvalidArgument("DALR cap c must be positive");
    if (!(fallback_h >= 0.0)) throw InvalidArgument("fallback step size must be nonnegative");
  }
};

struct AdaptiveRate {
  double h = 0.0;
  bool degenerate = false;  // g(θ) = 0, fallback_h returned
};

/// h_DAL = 2·(‖g‖/‖Hg‖)^p.
inline double dal_from_norms(double grad_norm, double hg_norm, double p) {
  if (!(hg_norm > 0.0)) throw UnboundedRate("DAL-p is unbounded when H(θ)g(θ) = 0; use DALR");
  return 2.0 * std::pow(grad_norm / hg_norm, p);
}

/// h_DALR = c / (1 + (c/2)·ratio^p), ratio = ‖Hg‖/‖g‖. Always in (0, c].
inline double dalr_from_ratio(double ratio, double c, double p) {
  return c / (1.0 + 0.5 * c * std::pow(ratio, p));
}

namespace detail {

template <GradientOracle O>
double hg_norm(const O& oracle, const Vector<scalar_of<O>>& theta, const Vector<scalar_of<O>>& g,
               const DalConfig& cfg) {
  if (cfg.hvp_method == HvpMethod::exact) return norm(hvp(oracle, theta, g, HvpMethod::exact));
  const double delta = cfg.delta > 0.0 ? cfg.delta : default_fd_delta(theta);
  return norm(finite_diff_hvp(oracle, theta, g, delta, g));
}

}  // namespace detail

/// DAL-p at θ given the already-evaluated step-start gradient g(θ).
/// With finite differences this costs one extra gradient evaluation.
template <GradientOracle O>
AdaptiveRate dal(const O& oracle, const Vector<scalar_of<O>>& theta, const Vector<scalar_of<O>>& g,
                 const DalConfig& cfg) {
  cfg.validate();
  const double gnorm = norm(g);
  if (gnorm == 0.0) return {cfg.fallback_h, true};
  return {dal_from_norms(gnorm, detail::hg_norm(oracle, theta, g, cfg), cfg.p), false};
}

template <GradientOracle O>
AdaptiveRate dal(const O& oracle, const Vector<scalar_of<O>>& theta, const DalConfig& cfg) {
  return dal(oracle, theta, Vector<scalar_of<O>>(oracle.gradient(theta)), cfg);
}

/// Rescaled DAL-p (DALR) at θ given the step-start gradient g(θ).
template <GradientOracle O>
AdaptiveRate dalr(const O& oracle, const Vector<scalar_of<O>>& theta, const Vector<scalar_of<O>>& g,
                  const DalConfig& cfg) {
  cfg.validate();
  const double gnorm = norm(g);
  if (gnorm == 0.0) return {cfg.fallback_h, true};
  return {dalr_from_ratio(detail::hg_norm(oracle, theta, g, cfg) / gnorm, cfg.c, cfg.p), false};
}

template <GradientOracle O>
AdaptiveRate dalr(const O& oracle, const Vector<scalar_of<O>>& theta, const DalConfig& cfg) {
  return dalr(oracle, theta, Vector<scalar_of<O>>(oracle.gradient(theta)), cfg);
}

}  // namespace rkopt
