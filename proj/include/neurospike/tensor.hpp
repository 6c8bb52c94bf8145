#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "neurospike/random.hpp"

namespace neurospike {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor: dimensions must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

// Ops record their backward pass only while grads are enabled on this thread.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

struct NoGradGuard {
  NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// One node of the dynamic autodiff graph. Ops allocate a fresh node per
// result; `parents` plus `backward` form the tape, which backward() frees.
template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated on demand, same length as data
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backward;

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  using Node = TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    const auto count = shape_numel(shape);
    n->shape = std::move(shape);
    n->data.assign(static_cast<std::size_t>(count), value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor of(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
      throw std::invalid_argument("tensor: data length does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return of({1}, {v}, requires_grad);
  }

  static Tensor uniform(Shape shape, T lo, T hi, Rng& rng, bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    for (auto& x : t.node()->data) x = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape.at(static_cast<std::size_t>(i)); }
  std::int64_t size() const { return n_->size(); }

  T* data() { return n_->data.data(); }
  const T* data() const { return n_->data.data(); }
  const std::vector<T>& vec() const { return n_->data; }

  T item() const {
    if (size() != 1) throw std::logic_error("tensor: item() requires a single element");
    return n_->data[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  Tensor& set_requires_grad(bool rg) {
    n_->requires_grad = rg;
    return *this;
  }

  T* grad_data() {
    n_->ensure_grad();
    return n_->grad.data();
  }
  const std::vector<T>& grad_vec() const { return n_->grad; }
  bool has_grad() const { return !n_->grad.empty(); }

  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }

  // Value copy with no graph attachment.
  Tensor detach() const {
    auto n = std::make_shared<Node>();
    n->shape = n_->shape;
    n->data = n_->data;
    return Tensor(std::move(n));
  }

  bool all_finite() const {
    for (T v : n_->data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Reverse-mode sweep from a scalar root. The recorded tape is released as
  // soon as each node has been processed; the traversal order owns the nodes
  // so releasing a parent edge cannot destroy a node still to be visited.
  void backward() {
    if (size() != 1) throw std::logic_error("backward: root must be a scalar");
    std::vector<std::shared_ptr<Node>> order;
    topo_sort(order);
    n_->ensure_grad();
    n_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = it->get();
      if (node->backward) {
        node->ensure_grad();
        node->backward(*node);
      }
      node->backward = nullptr;
      node->parents.clear();
    }
  }

  std::shared_ptr<Node> node() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  void topo_sort(std::vector<std::shared_ptr<Node>>& order) const {
    std::unordered_set<Node*> seen;
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    stack.emplace_back(n_, 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        const auto& p = node->parents[next++];
        if (p->requires_grad && seen.insert(p.get()).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(std::move(node));
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> n_;
};

namespace detail {

template <class T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <class T>
Tensor<T> make_result(Shape shape, std::vector<NodePtr<T>> parents,
                      std::function<void(TensorNode<T>&)> backward) {
  bool rg = false;
  if (grad_mode())
    for (const auto& p : parents)
      if (p->requires_grad) rg = true;
  auto out = Tensor<T>::zeros(std::move(shape), rg);
  if (rg) {
    out.node()->parents = std::move(parents);
    out.node()->backward = std::move(backward);
  }
  return out;
}

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

template <class T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<EigenMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const EigenMat<T>>;
template <class T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <class T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<T>(
      a.shape(), {an, bn}, [an = an.get(), bn = bn.get()](TensorNode<T>& self) {
        const std::size_t n = self.data.size();
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i];
        }
      });
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<T>(
      a.shape(), {an, bn}, [an = an.get(), bn = bn.get()](TensorNode<T>& self) {
        const std::size_t n = self.data.size();
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= self.grad[i];
        }
      });
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] - pb[i];
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<T>(
      a.shape(), {an, bn}, [an = an.get(), bn = bn.get()](TensorNode<T>& self) {
        const std::size_t n = self.data.size();
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * bn->data[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i] * an->data[i];
        }
      });
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  auto an = a.node();
  auto out = detail::make_result<T>(a.shape(), {an}, [an = an.get(), c](TensorNode<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) an->grad[i] += c * self.grad[i];
  });
  const T* pa = a.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < a.size(); ++i) po[i] = c * pa[i];
  return out;
}

// y = s * x with a trainable scalar s (shape [1]).
template <class T>
Tensor<T> scale_by(const Tensor<T>& x, const Tensor<T>& s) {
  if (s.size() != 1) throw std::invalid_argument("scale_by: scale must be a scalar tensor");
  auto xn = x.node(), sn = s.node();
  auto out = detail::make_result<T>(
      x.shape(), {xn, sn}, [xn = xn.get(), sn = sn.get()](TensorNode<T>& self) {
        const std::size_t n = self.data.size();
        if (xn->requires_grad) {
          xn->ensure_grad();
          const T sv = sn->data[0];
          for (std::size_t i = 0; i < n; ++i) xn->grad[i] += sv * self.grad[i];
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            acc += static_cast<double>(self.grad[i]) * static_cast<double>(xn->data[i]);
          sn->grad[0] += static_cast<T>(acc);
        }
      });
  const T sv = s.item();
  const T* px = x.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < x.size(); ++i) po[i] = sv * px[i];
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
  auto an = a.node();
  auto out = detail::make_result<T>(a.shape(), {an}, [an = an.get()](TensorNode<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i)
      if (an->data[i] > T(0)) an->grad[i] += self.grad[i];
  });
  const T* pa = a.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] > T(0) ? pa[i] : T(0);
  return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  auto an = a.node();
  auto out = detail::make_result<T>(a.shape(), {an}, [an = an.get()](TensorNode<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const T y = self.data[i];
      an->grad[i] += self.grad[i] * y * (T(1) - y);
    }
  });
  const T* pa = a.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double z = static_cast<double>(pa[i]);
    po[i] = static_cast<T>(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw std::invalid_argument("reshape: element count mismatch for " + shape_str(shape));
  auto an = a.node();
  auto out = detail::make_result<T>(std::move(shape), {an}, [an = an.get()](TensorNode<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) an->grad[i] += self.grad[i];
  });
  std::copy(a.data(), a.data() + a.size(), out.data());
  return out;
}

template <class T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: need at least one row");
  const Shape rs = rows[0].shape();
  const std::int64_t w = rows[0].size();
  std::vector<detail::NodePtr<T>> parents;
  parents.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.shape() != rs) throw std::invalid_argument("stack_rows: inconsistent row shapes");
    parents.push_back(r.node());
  }
  auto out = detail::make_result<T>(
      {static_cast<int>(rows.size()), static_cast<int>(w)}, parents,
      [w](TensorNode<T>& self) {
        for (std::size_t r = 0; r < self.parents.size(); ++r) {
          auto& p = *self.parents[r];
          if (!p.requires_grad) continue;
          p.ensure_grad();
          for (std::int64_t i = 0; i < w; ++i)
            p.grad[static_cast<std::size_t>(i)] += self.grad[r * static_cast<std::size_t>(w) + i];
        }
      });
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].data(), rows[r].data() + w, out.data() + static_cast<std::int64_t>(r) * w);
  return out;
}

// ---------------------------------------------------------------------------
// Reductions (64-bit accumulation)
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto an = a.node();
  auto out = detail::make_result<T>({1}, {an}, [an = an.get()](TensorNode<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const T g = self.grad[0];
    for (auto& v : an->grad) v += g;
  });
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a.data()[i]);
  out.data()[0] = static_cast<T>(acc);
  return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  auto an = a.node();
  auto out = detail::make_result<T>({1}, {an}, [an = an.get(), inv](TensorNode<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const T g = static_cast<T>(static_cast<double>(self.grad[0]) * inv);
    for (auto& v : an->grad) v += g;
  });
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a.data()[i]);
  out.data()[0] = static_cast<T>(acc * inv);
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<T>(
      {m, n}, {an, bn}, [an = an.get(), bn = bn.get(), m, k, n](TensorNode<T>& self) {
        detail::ConstMatMap<T> G(self.grad.data(), m, n);
        if (an->requires_grad) {
          an->ensure_grad();
          detail::MatMap<T> GA(an->grad.data(), m, k);
          detail::ConstMatMap<T> B(bn->data.data(), k, n);
          GA.noalias() += G * B.transpose();
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          detail::MatMap<T> GB(bn->grad.data(), k, n);
          detail::ConstMatMap<T> A(an->data.data(), m, k);
          GB.noalias() += A.transpose() * G;
        }
      });
  detail::ConstMatMap<T> A(a.data(), m, k);
  detail::ConstMatMap<T> B(b.data(), k, n);
  detail::MatMap<T> C(out.data(), m, n);
  C.noalias() = A * B;
  return out;
}

// y = x W^T + b with x [B,in], W [out,in], b [out].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1))
    throw std::invalid_argument("linear: incompatible shapes " + shape_str(x.shape()) + " x " +
                                shape_str(w.shape()));
  const int batch = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  if (b.size() != out_dim) throw std::invalid_argument("linear: bias length mismatch");
  auto xn = x.node(), wn = w.node(), bn = b.node();
  auto out = detail::make_result<T>(
      {batch, out_dim}, {xn, wn, bn},
      [xn = xn.get(), wn = wn.get(), bn = bn.get(), batch, in, out_dim](TensorNode<T>& self) {
        detail::ConstMatMap<T> G(self.grad.data(), batch, out_dim);
        if (xn->requires_grad) {
          xn->ensure_grad();
          detail::MatMap<T> GX(xn->grad.data(), batch, in);
          detail::ConstMatMap<T> W(wn->data.data(), out_dim, in);
          GX.noalias() += G * W;
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          detail::MatMap<T> GW(wn->grad.data(), out_dim, in);
          detail::ConstMatMap<T> X(xn->data.data(), batch, in);
          GW.noalias() += G.transpose() * X;
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int o = 0; o < out_dim; ++o) {
            double acc = 0.0;
            for (int r = 0; r < batch; ++r)
              acc += static_cast<double>(self.grad[static_cast<std::size_t>(r) * out_dim + o]);
            bn->grad[static_cast<std::size_t>(o)] += static_cast<T>(acc);
          }
        }
      });
  detail::ConstMatMap<T> X(x.data(), batch, in);
  detail::ConstMatMap<T> W(w.data(), out_dim, in);
  detail::MatMap<T> Y(out.data(), batch, out_dim);
  Y.noalias() = X * W.transpose();
  for (int r = 0; r < batch; ++r)
    for (int o = 0; o < out_dim; ++o) out.data()[static_cast<std::size_t>(r) * out_dim + o] += b.data()[o];
  return out;
}

// y = X v with X [N,n], v [n].
template <class T>
Tensor<T> matvec(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.ndim() != 2 || v.ndim() != 1 || x.dim(1) != v.dim(0))
    throw std::invalid_argument("matvec: incompatible shapes");
  const int rows = x.dim(0), cols = x.dim(1);
  auto xn = x.node(), vn = v.node();
  auto out = detail::make_result<T>(
      {rows}, {xn, vn}, [xn = xn.get(), vn = vn.get(), rows, cols](TensorNode<T>& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
              xn->grad[static_cast<std::size_t>(r) * cols + c] += self.grad[static_cast<std::size_t>(r)] * vn->data[static_cast<std::size_t>(c)];
        }
        if (vn->requires_grad) {
          vn->ensure_grad();
          for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int r = 0; r < rows; ++r)
              acc += static_cast<double>(self.grad[static_cast<std::size_t>(r)]) *
                     static_cast<double>(xn->data[static_cast<std::size_t>(r) * cols + c]);
            vn->grad[static_cast<std::size_t>(c)] += static_cast<T>(acc);
          }
        }
      });
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c)
      acc += static_cast<double>(x.data()[static_cast<std::size_t>(r) * cols + c]) *
             static_cast<double>(v.data()[c]);
    out.data()[r] = static_cast<T>(acc);
  }
  return out;
}

// y = X^T w with X [N,n], w [N]; the node-weighted feature sum.
template <class T>
Tensor<T> tmatvec(const Tensor<T>& x, const Tensor<T>& w) {
  if (x.ndim() != 2 || w.ndim() != 1 || x.dim(0) != w.dim(0))
    throw std::invalid_argument("tmatvec: incompatible shapes");
  const int rows = x.dim(0), cols = x.dim(1);
  auto xn = x.node(), wn = w.node();
  auto out = detail::make_result<T>(
      {cols}, {xn, wn}, [xn = xn.get(), wn = wn.get(), rows, cols](TensorNode<T>& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
              xn->grad[static_cast<std::size_t>(r) * cols + c] += wn->data[static_cast<std::size_t>(r)] * self.grad[static_cast<std::size_t>(c)];
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          for (int r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (int c = 0; c < cols; ++c)
              acc += static_cast<double>(xn->data[static_cast<std::size_t>(r) * cols + c]) *
                     static_cast<double>(self.grad[static_cast<std::size_t>(c)]);
            wn->grad[static_cast<std::size_t>(r)] += static_cast<T>(acc);
          }
        }
      });
  for (int c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (int r = 0; r < rows; ++r)
      acc += static_cast<double>(x.data()[static_cast<std::size_t>(r) * cols + c]) *
             static_cast<double>(w.data()[r]);
    out.data()[c] = static_cast<T>(acc);
  }
  return out;
}

// Broadcast row-vector bias over the rows of a matrix.
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.ndim() != 2 || b.size() != x.dim(1))
    throw std::invalid_argument("add_rowvec: incompatible shapes");
  const int rows = x.dim(0), cols = x.dim(1);
  auto xn = x.node(), bn = b.node();
  auto out = detail::make_result<T>(
      x.shape(), {xn, bn}, [xn = xn.get(), bn = bn.get(), rows, cols](TensorNode<T>& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t i = 0; i < self.data.size(); ++i) xn->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int r = 0; r < rows; ++r) acc += static_cast<double>(self.grad[static_cast<std::size_t>(r) * cols + c]);
            bn->grad[static_cast<std::size_t>(c)] += static_cast<T>(acc);
          }
        }
      });
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.data()[static_cast<std::size_t>(r) * cols + c] = x.data()[static_cast<std::size_t>(r) * cols + c] + b.data()[c];
  return out;
}

template <class T>
Tensor<T> softmax_vec(const Tensor<T>& v) {
  if (v.ndim() != 1) throw std::invalid_argument("softmax_vec: expects a vector");
  const int n = v.dim(0);
  auto vn = v.node();
  auto out = detail::make_result<T>({n}, {vn}, [vn = vn.get(), n](TensorNode<T>& self) {
    if (!vn->requires_grad) return;
    vn->ensure_grad();
    double dot = 0.0;
    for (int i = 0; i < n; ++i)
      dot += static_cast<double>(self.grad[static_cast<std::size_t>(i)]) * static_cast<double>(self.data[static_cast<std::size_t>(i)]);
    for (int i = 0; i < n; ++i)
      vn->grad[static_cast<std::size_t>(i)] += static_cast<T>(
          static_cast<double>(self.data[static_cast<std::size_t>(i)]) *
          (static_cast<double>(self.grad[static_cast<std::size_t>(i)]) - dot));
  });
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(v.data()[i]));
  double denom = 0.0;
  std::vector<double> e(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    e[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(v.data()[i]) - mx);
    denom += e[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < n; ++i) out.data()[i] = static_cast<T>(e[static_cast<std::size_t>(i)] / denom);
  return out;
}

}  // namespace neurospike
