#pragma once

#include <cmath>
#include <stdexcept>

#include "neurospike/tensor.hpp"

namespace neurospike {

// Per-class loss multipliers, w_i = N_D / (2 * N_i).
struct ClassWeights {
  double w0 = 1.0;
  double w1 = 1.0;

  ClassWeights() = default;
  ClassWeights(double a, double b) : w0(a), w1(b) {
    if (!(w0 > 0.0) || !(w1 > 0.0))
      throw std::invalid_argument("class weights must be positive");
  }

  static ClassWeights from_counts(long n0, long n1) {
    if (n0 <= 0 || n1 <= 0)
      throw std::invalid_argument("class weights: both classes must be present");
    const double nd = static_cast<double>(n0 + n1);
    return ClassWeights(nd / (2.0 * static_cast<double>(n0)),
                        nd / (2.0 * static_cast<double>(n1)));
  }
};

inline constexpr double kBceClamp = 1e-7;

// Weighted binary cross entropy, mean over elements:
//   -mean_i w_i * (t_i log p_i + (1-t_i) log(1-p_i))
// Predictions are clamped to [kBceClamp, 1-kBceClamp]; the gradient is taken
// at the clamped value. Targets and weights carry no gradient.
template <class T>
Tensor<T> weighted_bce(const Tensor<T>& pred, const Tensor<T>& target,
                       const Tensor<T>& weights) {
  detail::check_same_shape(pred, target, "weighted_bce");
  detail::check_same_shape(pred, weights, "weighted_bce");
  const std::int64_t n = pred.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = static_cast<double>(pred.data()[i]);
    if (!(p >= 0.0 && p <= 1.0))
      throw std::domain_error("weighted_bce: prediction outside [0,1]");
    const double t = static_cast<double>(target.data()[i]);
    if (t != 0.0 && t != 1.0)
      throw std::domain_error("weighted_bce: targets must be 0 or 1");
  }
  auto pn = pred.node(), tn = target.node(), wn = weights.node();
  const double inv_n = 1.0 / static_cast<double>(n);
  auto out = detail::make_result<T>(
      {1}, {pn, tn, wn},
      [pn = pn.get(), tn = tn.get(), wn = wn.get(), n, inv_n](TensorNode<T>& self) {
        if (!pn->requires_grad) return;
        pn->ensure_grad();
        const double g = static_cast<double>(self.grad[0]) * inv_n;
        for (std::int64_t i = 0; i < n; ++i) {
          const std::size_t k = static_cast<std::size_t>(i);
          double p = static_cast<double>(pn->data[k]);
          p = std::min(1.0 - kBceClamp, std::max(kBceClamp, p));
          const double t = static_cast<double>(tn->data[k]);
          const double w = static_cast<double>(wn->data[k]);
          pn->grad[k] += static_cast<T>(-g * w * (t / p - (1.0 - t) / (1.0 - p)));
        }
      });
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double p = static_cast<double>(pred.data()[i]);
    p = std::min(1.0 - kBceClamp, std::max(kBceClamp, p));
    const double t = static_cast<double>(target.data()[i]);
    const double w = static_cast<double>(weights.data()[i]);
    acc += w * (t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  out.data()[0] = static_cast<T>(-acc * inv_n);
  return out;
}

// Convenience form with the per-element weight selected by the element's
// target class.
template <class T>
Tensor<T> weighted_bce(const Tensor<T>& pred, const Tensor<T>& target,
                       const ClassWeights& cw) {
  auto w = Tensor<T>::zeros(target.shape());
  for (std::int64_t i = 0; i < target.size(); ++i)
    w.data()[i] = static_cast<T>(target.data()[i] == T(1) ? cw.w1 : cw.w0);
  return weighted_bce(pred, target, w);
}

}  // namespace neurospike
