#pragma once

#include <cstring>
#include <vector>

#include "neurospike/tensor.hpp"

namespace neurospike {

namespace detail {

// im2col for valid cross-correlation, stride 1. Layout: row (c*KH+i)*KW+j,
// column oh*OW+ow.
template <class T>
void im2col(const T* x, int C, int H, int W, int KH, int KW, T* cols) {
  const int OH = H - KH + 1, OW = W - KW + 1;
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < KH; ++i)
      for (int j = 0; j < KW; ++j) {
        T* dst = cols + (static_cast<std::size_t>((c * KH + i) * KW + j)) * OH * OW;
        const T* src = x + static_cast<std::size_t>(c) * H * W + static_cast<std::size_t>(i) * W + j;
        for (int oh = 0; oh < OH; ++oh)
          std::memcpy(dst + static_cast<std::size_t>(oh) * OW, src + static_cast<std::size_t>(oh) * W,
                      sizeof(T) * static_cast<std::size_t>(OW));
      }
}

template <class T>
void col2im_add(const T* cols, int C, int H, int W, int KH, int KW, T* gx) {
  const int OH = H - KH + 1, OW = W - KW + 1;
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < KH; ++i)
      for (int j = 0; j < KW; ++j) {
        const T* src = cols + (static_cast<std::size_t>((c * KH + i) * KW + j)) * OH * OW;
        T* dst = gx + static_cast<std::size_t>(c) * H * W + static_cast<std::size_t>(i) * W + j;
        for (int oh = 0; oh < OH; ++oh) {
          T* drow = dst + static_cast<std::size_t>(oh) * W;
          const T* srow = src + static_cast<std::size_t>(oh) * OW;
          for (int ow = 0; ow < OW; ++ow) drow[ow] += srow[ow];
        }
      }
}

}  // namespace detail

// Valid cross-correlation, stride 1, no padding: x [B,C,H,W], kernels
// [O,C,KH,KW], bias [O] -> [B,O,H-KH+1,W-KW+1].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
  if (x.ndim() != 4 || kernels.ndim() != 4)
    throw std::invalid_argument("conv2d: expects 4-d input and kernels");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = kernels.dim(0), KC = kernels.dim(1), KH = kernels.dim(2), KW = kernels.dim(3);
  if (KC != C) throw std::invalid_argument("conv2d: channel mismatch");
  if (H < KH || W < KW)
    throw std::invalid_argument("conv2d: spatial dims " + shape_str({H, W}) +
                                " smaller than kernel " + shape_str({KH, KW}));
  if (bias.size() != O) throw std::invalid_argument("conv2d: bias length mismatch");
  const int OH = H - KH + 1, OW = W - KW + 1;
  const int K = C * KH * KW, P = OH * OW;

  auto xn = x.node(), kn = kernels.node(), bn = bias.node();
  auto out = detail::make_result<T>(
      {B, O, OH, OW}, {xn, kn, bn},
      [xn = xn.get(), kn = kn.get(), bn = bn.get(), B, C, H, W, O, KH, KW, K,
       P](TensorNode<T>& self) {
        const int OHW = P;
        std::vector<T> cols(static_cast<std::size_t>(K) * P);
        std::vector<T> colsg;
        if (xn->requires_grad) colsg.resize(static_cast<std::size_t>(K) * P);
        if (xn->requires_grad) xn->ensure_grad();
        if (kn->requires_grad) kn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        detail::ConstMatMap<T> Wm(kn->data.data(), O, K);
        for (int b = 0; b < B; ++b) {
          const T* xb = xn->data.data() + static_cast<std::size_t>(b) * C * H * W;
          detail::ConstMatMap<T> G(self.grad.data() + static_cast<std::size_t>(b) * O * OHW, O, OHW);
          if (kn->requires_grad) {
            detail::im2col(xb, C, H, W, KH, KW, cols.data());
            detail::MatMap<T> GW(kn->grad.data(), O, K);
            detail::ConstMatMap<T> Cm(cols.data(), K, OHW);
            GW.noalias() += G * Cm.transpose();
          }
          if (bn->requires_grad) {
            for (int o = 0; o < O; ++o) {
              double acc = 0.0;
              const T* row = self.grad.data() + (static_cast<std::size_t>(b) * O + o) * OHW;
              for (int p = 0; p < OHW; ++p) acc += static_cast<double>(row[p]);
              bn->grad[static_cast<std::size_t>(o)] += static_cast<T>(acc);
            }
          }
          if (xn->requires_grad) {
            detail::MatMap<T> CG(colsg.data(), K, OHW);
            CG.noalias() = Wm.transpose() * G;
            detail::col2im_add(colsg.data(), C, H, W, KH, KW,
                               xn->grad.data() + static_cast<std::size_t>(b) * C * H * W);
          }
        }
      });

  std::vector<T> cols(static_cast<std::size_t>(K) * P);
  detail::ConstMatMap<T> Wm(kernels.data(), O, K);
  for (int b = 0; b < B; ++b) {
    detail::im2col(x.data() + static_cast<std::size_t>(b) * C * H * W, C, H, W, KH, KW, cols.data());
    detail::ConstMatMap<T> Cm(cols.data(), K, P);
    detail::MatMap<T> Y(out.data() + static_cast<std::size_t>(b) * O * P, O, P);
    Y.noalias() = Wm * Cm;
    for (int o = 0; o < O; ++o) {
      T* row = out.data() + (static_cast<std::size_t>(b) * O + o) * P;
      const T bv = bias.data()[o];
      for (int p = 0; p < P; ++p) row[p] += bv;
    }
  }
  return out;
}

// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
// Ties route the gradient to the first (lowest-index) argmax.
template <class T>
Tensor<T> maxpool2d(const Tensor<T>& x) {
  if (x.ndim() != 4) throw std::invalid_argument("maxpool2d: expects 4-d input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < 2 || W < 2) throw std::invalid_argument("maxpool2d: spatial dims must be >= 2");
  const int OH = H / 2, OW = W / 2;
  auto xn = x.node();
  auto argmax = std::make_shared<std::vector<std::int32_t>>(
      static_cast<std::size_t>(B) * C * OH * OW);
  auto out = detail::make_result<T>(
      {B, C, OH, OW}, {xn}, [xn = xn.get(), argmax](TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          xn->grad[static_cast<std::size_t>((*argmax)[i])] += self.grad[i];
      });
  const T* px = x.data();
  T* po = out.data();
  std::size_t oi = 0;
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * H * W;
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow, ++oi) {
          std::size_t best = base + static_cast<std::size_t>(2 * oh) * W + 2 * ow;
          T bv = px[best];
          const std::size_t cand[3] = {best + 1, best + static_cast<std::size_t>(W),
                                       best + static_cast<std::size_t>(W) + 1};
          for (std::size_t k : cand)
            if (px[k] > bv) {
              bv = px[k];
              best = k;
            }
          po[oi] = bv;
          (*argmax)[oi] = static_cast<std::int32_t>(best);
        }
    }
  return out;
}

enum class Activation { kLinear, kSigmoid };

template <class T>
struct DenseLayer {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]

  DenseLayer() = default;
  DenseLayer(int in, int out, Rng& rng) { init(in, out, rng); }

  void init(int in, int out, Rng& rng) {
    const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
    weight = Tensor<T>::uniform({out, in}, -bound, bound, rng, true);
    bias = Tensor<T>::zeros({out}, true);
  }

  Tensor<T> forward(const Tensor<T>& x, Activation act = Activation::kLinear) const {
    auto y = linear(x, weight, bias);
    return act == Activation::kSigmoid ? sigmoid(y) : y;
  }

  std::vector<Tensor<T>*> params() { return {&weight, &bias}; }
};

template <class T>
struct Conv2dLayer {
  Tensor<T> kernels;  // [out_ch, in_ch, k, k]
  Tensor<T> bias;     // [out_ch]

  Conv2dLayer() = default;
  Conv2dLayer(int in_ch, int out_ch, int k, Rng& rng) { init(in_ch, out_ch, k, rng); }

  void init(int in_ch, int out_ch, int k, Rng& rng) {
    const int fan_in = in_ch * k * k;
    const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(fan_in)));
    kernels = Tensor<T>::uniform({out_ch, in_ch, k, k}, -bound, bound, rng, true);
    bias = Tensor<T>::zeros({out_ch}, true);
  }

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, kernels, bias); }

  std::vector<Tensor<T>*> params() { return {&kernels, &bias}; }
};

// Output spatial extent of the conv(5x5) -> pool(2x2) -> conv(5x5) -> pool(2x2)
// stack used by both the CNN and the CSNN.
struct ConvStackDims {
  int h1, w1, hp1, wp1, h2, w2, hp2, wp2, flat;
};

inline ConvStackDims conv_stack_dims(int height, int width, int ch2 = 64) {
  ConvStackDims d{};
  d.h1 = height - 4;
  d.w1 = width - 4;
  d.hp1 = d.h1 / 2;
  d.wp1 = d.w1 / 2;
  if (d.hp1 < 5 || d.wp1 < 5)
    throw std::invalid_argument("conv stack: input too small after first pool");
  d.h2 = d.hp1 - 4;
  d.w2 = d.wp1 - 4;
  d.hp2 = d.h2 / 2;
  d.wp2 = d.w2 / 2;
  if (d.hp2 < 1 || d.wp2 < 1) throw std::invalid_argument("conv stack: input too small");
  d.flat = ch2 * d.hp2 * d.wp2;
  return d;
}

}  // namespace neurospike
