#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "gqcnn/tensor.hpp"

namespace gqcnn {

template <typename Scalar>
using ScalarFunction = std::function<Tensor<Scalar>(const Tensor<Scalar>&)>;

/// Compares the reverse-mode gradient of `f` at `point` with central
/// differences. Returns max_i |analytic_i - numeric_i| / max(1, |analytic_i|, |numeric_i|).
///
/// `point` is perturbed in place and restored afterwards, so `f` may read it
/// through other handles (e.g. a model parameter).
template <typename Scalar>
double grad_check(const ScalarFunction<Scalar>& f, Tensor<Scalar>& point, double epsilon) {
  const bool had_grad_flag = point.requires_grad();
  point.set_requires_grad(true);
  point.zero_grad();
  Tensor<Scalar> loss = f(point);
  if (loss.size() != 1) {
    point.set_requires_grad(had_grad_flag);
    throw ContractError("grad_check: function must be scalar-valued, got shape " +
                        to_string(loss.shape()));
  }
  loss.backward();
  Storage<Scalar> analytic =
      point.has_grad() ? Storage<Scalar>(point.grad()) : Storage<Scalar>::Zero(point.size());
  point.zero_grad();

  auto& values = point.mutable_values();
  double worst = 0;
  for (Index i = 0; i < point.size(); ++i) {
    const Scalar saved = values[i];
    values[i] = saved + static_cast<Scalar>(epsilon);
    const double plus = f(point).item();
    values[i] = saved - static_cast<Scalar>(epsilon);
    const double minus = f(point).item();
    values[i] = saved;
    const double numeric = (plus - minus) / (2 * epsilon);
    const double a = analytic[i];
    const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  point.zero_grad();
  point.set_requires_grad(had_grad_flag);
  return worst;
}

}  // namespace gqcnn
