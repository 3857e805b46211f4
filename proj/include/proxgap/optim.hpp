#pragma once

#include "proxgap/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace proxgap {

template <typename Scalar = double>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector m;
  Vector v;
  std::uint64_t t = 0;
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  static AdamState fresh(Eigen::Index n, Scalar lr, Scalar beta1 = Scalar(0.9),
                         Scalar beta2 = Scalar(0.999), Scalar eps = Scalar(1e-8)) {
    AdamState s;
    s.m = Vector::Zero(n);
    s.v = Vector::Zero(n);
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
  }
};

/// One bias-corrected Adam descent step. Returns the updated parameters and
/// advances `state` (m, v, t). Ascent callers pass the negated gradient.
template <class DerivedP, class DerivedG, typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> adam_step(const Eigen::MatrixBase<DerivedP>& params,
                                                   const Eigen::MatrixBase<DerivedG>& grad,
                                                   AdamState<Scalar>& state) {
  require(params.size() == grad.size(), "adam_step: gradient length mismatch");
  using Vector = typename AdamState<Scalar>::Vector;
  if (state.m.size() == 0) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
  }
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          "adam_step: moment length mismatch");
  state.t += 1;
  state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * grad;
  state.v = state.beta2 * state.v + (Scalar(1) - state.beta2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.t));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.t));
  return params -
         (state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps))
             .matrix();
}

/// Projection onto the box [-c, c]^n.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> clip_params(
    const Eigen::MatrixBase<Derived>& params, typename Derived::Scalar c) {
  require(c > 0, "clip_params: clip bound must be positive");
  return params.cwiseMax(-c).cwiseMin(c);
}

}  // namespace proxgap
