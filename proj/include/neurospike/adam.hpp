#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "neurospike/tensor.hpp"

namespace neurospike {

// Adam with bias correction; moment buffers are laid out parallel to the
// parameter list handed to init().
template <class T>
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<std::vector<T>> m, v;

  AdamState() = default;
  AdamState(double lr_, double b1, double b2, double eps_)
      : lr(lr_), beta1(b1), beta2(b2), eps(eps_) {
    validate();
  }

  void validate() const {
    if (!(lr > 0.0) || !(eps > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) ||
        !(beta2 > 0.0 && beta2 < 1.0))
      throw std::invalid_argument("adam: require lr>0, eps>0, 0<beta1<1, 0<beta2<1");
  }

  void init(const std::vector<Tensor<T>*>& params) {
    validate();
    m.clear();
    v.clear();
    for (const auto* p : params) {
      m.emplace_back(static_cast<std::size_t>(p->size()), T(0));
      v.emplace_back(static_cast<std::size_t>(p->size()), T(0));
    }
    step_count = 0;
  }
};

template <class T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::runtime_error("adam_step: state not initialized for this parameter list");
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    if (!p.has_grad())
      throw std::runtime_error("adam_step: parameter has no gradient");
    if (state.m[i].size() != static_cast<std::size_t>(p.size()))
      throw std::runtime_error("adam_step: moment buffer shape mismatch");
    const T* g = p.grad_data();
    T* x = p.data();
    T* mi = state.m[i].data();
    T* vi = state.v[i].data();
    const std::size_t n = state.m[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = state.beta1 * static_cast<double>(mi[j]) + (1.0 - state.beta1) * gj;
      const double vj = state.beta2 * static_cast<double>(vi[j]) + (1.0 - state.beta2) * gj * gj;
      mi[j] = static_cast<T>(mj);
      vi[j] = static_cast<T>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      x[j] = static_cast<T>(static_cast<double>(x[j]) - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

}  // namespace neurospike
