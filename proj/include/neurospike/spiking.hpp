#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "neurospike/layers.hpp"
#include "neurospike/tensor.hpp"

namespace neurospike {

// Forward behavior of the spike nonlinearity. Training and inference use the
// hard Heaviside step; the smoothed fast-sigmoid forward exists so the
// surrogate backward can be validated against finite differences.
enum class SpikeForward { kHard, kSmooth };

// Spike with fast-sigmoid surrogate gradient. Forward (hard mode) emits
// Theta(u - theta) with strict inequality; backward always substitutes
//   dS/du = 1 / (k|u - theta| + 1)^2.
template <class T>
Tensor<T> surrogate_spike(const Tensor<T>& u, double theta, double k,
                          SpikeForward mode = SpikeForward::kHard) {
  if (!(k > 0.0)) throw std::invalid_argument("surrogate_spike: slope k must be positive");
  auto un = u.node();
  auto out = detail::make_result<T>(
      u.shape(), {un}, [un = un.get(), theta, k](TensorNode<T>& self) {
        if (!un->requires_grad) return;
        un->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          const double d = k * std::abs(static_cast<double>(un->data[i]) - theta) + 1.0;
          un->grad[i] += static_cast<T>(static_cast<double>(self.grad[i]) / (d * d));
        }
      });
  const T* pu = u.data();
  T* po = out.data();
  if (mode == SpikeForward::kHard) {
    for (std::int64_t i = 0; i < u.size(); ++i)
      po[i] = static_cast<double>(pu[i]) > theta ? T(1) : T(0);
  } else {
    for (std::int64_t i = 0; i < u.size(); ++i) {
      const double d = static_cast<double>(pu[i]) - theta;
      po[i] = static_cast<T>(d / (1.0 + k * std::abs(d)));
    }
  }
  return out;
}

inline double surrogate_derivative(double u, double theta, double k) {
  const double d = k * std::abs(u - theta) + 1.0;
  return 1.0 / (d * d);
}

// Leaky integrate-and-fire layer. Membrane update per step:
//   U' = beta * U + I,  S = Theta(U' - theta),  U <- U' - S * theta
// State is part of the autodiff graph so gradients flow through time.
template <class T>
struct LifLayer {
  double beta = 0.5;
  double theta = 0.5;
  double k = 0.25;
  SpikeForward mode = SpikeForward::kHard;
  Tensor<T> membrane;

  LifLayer() = default;
  LifLayer(double beta_, double theta_, double k_) : beta(beta_), theta(theta_), k(k_) {
    if (!(beta > 0.0 && beta <= 1.0))
      throw std::invalid_argument("lif: decay rate must be in (0,1]");
    if (!(theta > 0.0)) throw std::invalid_argument("lif: threshold must be positive");
  }

  void reset(const Shape& shape) { membrane = Tensor<T>::zeros(shape); }

  Tensor<T> step(const Tensor<T>& current) {
    if (!membrane.defined() || membrane.shape() != current.shape())
      throw std::invalid_argument("lif: membrane shape " +
                                  (membrane.defined() ? shape_str(membrane.shape()) : "<unset>") +
                                  " does not match input " + shape_str(current.shape()));
    auto u_pre = add(scale(membrane, static_cast<T>(beta)), current);
    if (!u_pre.all_finite()) throw std::runtime_error("lif: non-finite membrane potential");
    auto s = surrogate_spike(u_pre, theta, k, mode);
    membrane = sub(u_pre, scale(s, static_cast<T>(theta)));
    return s;
  }
};

struct CsnnConfig {
  int steps = 25;
  double beta = 0.5;
  double theta = 0.5;
  double k = 0.25;
  int conv1_filters = 12;
  int conv2_filters = 64;
  int kernel = 5;
};

// Two convolutional-spiking blocks (conv -> pool -> LIF) and a dense output
// block ending in a 2-neuron LIF layer. The input tensor is presented
// unchanged at each of the 25 steps and class scores are the per-neuron
// spike counts.
template <class T>
struct CsnnModel {
  CsnnConfig cfg;
  int in_h = 0, in_w = 0;
  ConvStackDims dims{};
  Conv2dLayer<T> conv1, conv2;
  DenseLayer<T> fc;
  LifLayer<T> lif1, lif2, lif_out;

  CsnnModel(int height, int width, const CsnnConfig& c, Rng& rng) : cfg(c) {
    in_h = height;
    in_w = width;
    dims = conv_stack_dims(height, width, cfg.conv2_filters);
    conv1.init(1, cfg.conv1_filters, cfg.kernel, rng);
    conv2.init(cfg.conv1_filters, cfg.conv2_filters, cfg.kernel, rng);
    fc.init(dims.flat, 2, rng);
    lif1 = LifLayer<T>(cfg.beta, cfg.theta, cfg.k);
    lif2 = LifLayer<T>(cfg.beta, cfg.theta, cfg.k);
    lif_out = LifLayer<T>(cfg.beta, cfg.theta, cfg.k);
  }

  void set_forward_mode(SpikeForward m) { lif1.mode = lif2.mode = lif_out.mode = m; }

  std::vector<Tensor<T>*> params() {
    return {&conv1.kernels, &conv1.bias, &conv2.kernels, &conv2.bias, &fc.weight, &fc.bias};
  }

  // x: [B,1,H,W]; returns accumulated output spike counts scaled to rates
  // [B,2] in [0,1].
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != in_h || x.dim(3) != in_w)
      throw std::invalid_argument("csnn: expected input [B,1," + std::to_string(in_h) + "," +
                                  std::to_string(in_w) + "], got " + shape_str(x.shape()));
    const int batch = x.dim(0);
    lif1.reset({batch, cfg.conv1_filters, dims.hp1, dims.wp1});
    lif2.reset({batch, cfg.conv2_filters, dims.hp2, dims.wp2});
    lif_out.reset({batch, 2});

    // The input is static over the presentation, so the first conv-pool
    // stage is computed once and its activations reused at every step.
    auto pooled1 = maxpool2d(conv1.forward(x));

    Tensor<T> acc = Tensor<T>::zeros({batch, 2});
    for (int t = 0; t < cfg.steps; ++t) {
      auto s1 = lif1.step(pooled1);
      auto pooled2 = maxpool2d(conv2.forward(s1));
      auto s2 = lif2.step(pooled2);
      auto z = fc.forward(reshape(s2, {batch, dims.flat}), Activation::kLinear);
      auto so = lif_out.step(z);
      acc = add(acc, so);
    }
    return scale(acc, static_cast<T>(1.0 / cfg.steps));
  }

  // Single-sample convenience: returns (rates, integer spike counts).
  std::pair<std::array<double, 2>, std::array<int, 2>> forward_sample(const Tensor<T>& epoch) {
    NoGradGuard ng;
    auto x = reshape(epoch, {1, 1, in_h, in_w});
    auto rates = forward(x);
    std::array<double, 2> r{static_cast<double>(rates.data()[0]),
                            static_cast<double>(rates.data()[1])};
    std::array<int, 2> counts{static_cast<int>(std::lround(r[0] * cfg.steps)),
                              static_cast<int>(std::lround(r[1] * cfg.steps))};
    return {r, counts};
  }
};

}  // namespace neurospike
