#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "neurospike/layers.hpp"
#include "neurospike/tensor.hpp"

namespace neurospike {

// Dense adjacency shared by every sample, A = |P| - I over channel-pair
// Pearson correlations. Stored with the derived propagation matrices so the
// graph layers only do matrix products.
struct SharedAdjacency {
  int n_nodes = 0;
  std::vector<double> a;          // [N,N], symmetric, zero diagonal
  std::vector<double> degree;     // D_ii of A (no self loops)
  std::vector<double> gcn_norm;   // Dhat^{-1/2} (A+I) Dhat^{-1/2}
  std::vector<double> gcs_norm;   // D^{-1/2} A D^{-1/2}, zero rows for isolated nodes
  std::vector<double> neighbor;   // 1 where A_ij > 0 else 0
  std::vector<std::string> zero_variance_channels;

  static SharedAdjacency from_matrix(int n, std::vector<double> matrix);

  template <class T>
  Tensor<T> tensor_of(const std::vector<double>& m) const {
    std::vector<T> v(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) v[i] = static_cast<T>(m[i]);
    return Tensor<T>::of({n_nodes, n_nodes}, std::move(v));
  }
};

// Pearson correlation per channel pair over the concatenated time samples of
// the given epochs ([C,L] tensors). Zero-variance channels are flagged and
// their correlations set to 0.
SharedAdjacency adjacency_from_dataset(const std::vector<const float*>& epochs,
                                       int channels, std::int64_t samples_per_epoch,
                                       std::vector<std::string> channel_names = {});

// Y = Dhat^{-1/2} (A+I) Dhat^{-1/2} X W + b, with the propagation matrix
// precomputed in `norm`.
template <class T>
Tensor<T> gcn_layer(const Tensor<T>& x, const Tensor<T>& norm, const Tensor<T>& w,
                    const Tensor<T>& b) {
  return add_rowvec(matmul(matmul(norm, x), w), b);
}

// Y = D^{-1/2} A D^{-1/2} X W1 + X W2 + b (GCN with a trainable skip).
template <class T>
Tensor<T> gcs_layer(const Tensor<T>& x, const Tensor<T>& norm, const Tensor<T>& w1,
                    const Tensor<T>& w2, const Tensor<T>& b) {
  return add_rowvec(add(matmul(matmul(norm, x), w1), matmul(x, w2)), b);
}

// Per-node: Y_i = MLP((1+eps) x_i + sum_{j in N(i)} x_j); `neighbor` is the
// binary neighborhood matrix and eps a learned scalar.
template <class T, class MlpFn>
Tensor<T> gin_layer(const Tensor<T>& x, const Tensor<T>& neighbor, const Tensor<T>& one_plus_eps,
                    MlpFn&& mlp) {
  auto agg = add(scale_by(x, one_plus_eps), matmul(neighbor, x));
  return mlp(agg);
}

// Global attention sum pooling: alpha = softmax(X a) over nodes,
// X' = sum_i alpha_i X_i.
template <class T>
Tensor<T> attention_sum_pool(const Tensor<T>& x, const Tensor<T>& a) {
  auto alpha = softmax_vec(matvec(x, a));
  return tmatvec(x, alpha);
}

enum class GnnVariant { kGcn, kGcs, kGin };

inline const char* gnn_variant_name(GnnVariant v) {
  switch (v) {
    case GnnVariant::kGcn: return "gcn";
    case GnnVariant::kGcs: return "gcs";
    default: return "gin";
  }
}

struct GnnConfig {
  GnnVariant variant = GnnVariant::kGcn;
  std::vector<int> gcn_sizes = {115, 28, 14, 3};
  std::vector<int> gin_sizes = {924, 462, 231};
  int gin_mlp_hidden = 256;
  int gin_mlp_layers = 5;
  int hidden_units = 32;
};

// The three GNN baselines: variant-specific graph layers followed by a shared
// head (attention sum pool -> dense ReLU -> 1-unit sigmoid).
template <class T>
struct GnnModel {
  GnnConfig cfg;
  int n_features = 0;
  Tensor<T> gcn_norm, gcs_norm, neighbor;

  struct GraphLayer {
    Tensor<T> w1, w2, b;            // GCN uses w1/b; GCS adds w2
    Tensor<T> one_plus_eps;         // GIN
    std::vector<DenseLayer<T>> mlp; // GIN
  };
  std::vector<GraphLayer> layers;
  Tensor<T> attention;
  DenseLayer<T> hidden, output;

  GnnModel(const GnnConfig& c, const SharedAdjacency& adj, int features, Rng& rng) : cfg(c) {
    n_features = features;
    gcn_norm = adj.tensor_of<T>(adj.gcn_norm);
    gcs_norm = adj.tensor_of<T>(adj.gcs_norm);
    neighbor = adj.tensor_of<T>(adj.neighbor);

    const auto& sizes = cfg.variant == GnnVariant::kGin ? cfg.gin_sizes : cfg.gcn_sizes;
    int in = features;
    for (int out : sizes) {
      GraphLayer layer;
      if (cfg.variant == GnnVariant::kGin) {
        layer.one_plus_eps = Tensor<T>::scalar(T(1), true);  // eps initialized to 0
        int mlp_in = in;
        for (int h = 0; h < cfg.gin_mlp_layers; ++h) {
          layer.mlp.emplace_back(mlp_in, cfg.gin_mlp_hidden, rng);
          mlp_in = cfg.gin_mlp_hidden;
        }
        layer.mlp.emplace_back(mlp_in, out, rng);
      } else {
        const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
        layer.w1 = Tensor<T>::uniform({in, out}, -bound, bound, rng, true);
        if (cfg.variant == GnnVariant::kGcs)
          layer.w2 = Tensor<T>::uniform({in, out}, -bound, bound, rng, true);
        layer.b = Tensor<T>::zeros({out}, true);
      }
      layers.push_back(std::move(layer));
      in = out;
    }
    const T abound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
    attention = Tensor<T>::uniform({in}, -abound, abound, rng, true);
    hidden.init(in, cfg.hidden_units, rng);
    output.init(cfg.hidden_units, 1, rng);
  }

  std::vector<Tensor<T>*> params() {
    std::vector<Tensor<T>*> ps;
    for (auto& l : layers) {
      if (cfg.variant == GnnVariant::kGin) {
        ps.push_back(&l.one_plus_eps);
        for (auto& d : l.mlp) {
          ps.push_back(&d.weight);
          ps.push_back(&d.bias);
        }
      } else {
        ps.push_back(&l.w1);
        if (cfg.variant == GnnVariant::kGcs) ps.push_back(&l.w2);
        ps.push_back(&l.b);
      }
    }
    ps.push_back(&attention);
    ps.push_back(&hidden.weight);
    ps.push_back(&hidden.bias);
    ps.push_back(&output.weight);
    ps.push_back(&output.bias);
    return ps;
  }

  // x: one graph sample [N, n_features]; returns probability [1].
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 2 || x.dim(1) != n_features)
      throw std::invalid_argument("gnn: expected [N," + std::to_string(n_features) + "], got " +
                                  shape_str(x.shape()));
    Tensor<T> h = x;
    for (auto& l : layers) {
      if (cfg.variant == GnnVariant::kGin) {
        h = gin_layer(h, neighbor, l.one_plus_eps, [&](const Tensor<T>& z) {
          Tensor<T> m = z;
          for (std::size_t i = 0; i + 1 < l.mlp.size(); ++i)
            m = relu(l.mlp[i].forward(m));
          return l.mlp.back().forward(m);
        });
      } else if (cfg.variant == GnnVariant::kGcs) {
        h = gcs_layer(h, gcs_norm, l.w1, l.w2, l.b);
      } else {
        h = gcn_layer(h, gcn_norm, l.w1, l.b);
      }
      h = relu(h);
    }
    auto pooled = attention_sum_pool(h, attention);
    auto hid = relu(linear(reshape(pooled, {1, h.dim(1)}), hidden.weight, hidden.bias));
    auto p = sigmoid(linear(hid, output.weight, output.bias));
    return reshape(p, {1});
  }
};

}  // namespace neurospike
