#pragma once

#include <cmath>
#include <concepts>

#include <Eigen/Core>

namespace hallu {

template <std::floating_point Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(z)) without overflow.
template <std::floating_point Scalar>
Scalar softplus(Scalar z) {
  return z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return z.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Derived>
auto softplus(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return z.unaryExpr([](Scalar v) { return softplus(v); });
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.derived().array() - m).exp().sum());
}

/// Normalized probabilities from unnormalized log-weights.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  const auto lse = log_sum_exp(logits);
  return (logits.array() - lse).exp().matrix();
}

/// Mean binary cross-entropy of logits `z` against 0/1 targets `y`.
template <typename DerivedZ, typename DerivedY>
typename DerivedZ::Scalar mean_bce_with_logits(const Eigen::ArrayBase<DerivedZ>& z,
                                               const Eigen::ArrayBase<DerivedY>& y) {
  return (softplus(z) - y * z).mean();
}

}  // namespace hallu
