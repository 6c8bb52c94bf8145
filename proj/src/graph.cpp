#include "neurospike/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace neurospike {

SharedAdjacency SharedAdjacency::from_matrix(int n, std::vector<double> matrix) {
  if (n <= 0 || matrix.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
    throw std::invalid_argument("adjacency: matrix size mismatch");
  SharedAdjacency adj;
  adj.n_nodes = n;
  adj.a = std::move(matrix);
  for (int i = 0; i < n; ++i) {
    adj.a[static_cast<std::size_t>(i) * n + i] = 0.0;
    for (int j = 0; j < n; ++j) {
      const double v = adj.a[static_cast<std::size_t>(i) * n + j];
      if (v < -1e-12 || v > 1.0 + 1e-12)
        throw std::invalid_argument("adjacency: entries must lie in [0,1]");
      const double vt = adj.a[static_cast<std::size_t>(j) * n + i];
      if (std::abs(v - vt) > 1e-9) throw std::invalid_argument("adjacency: matrix must be symmetric");
    }
  }

  adj.degree.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double d = 0.0;
    for (int j = 0; j < n; ++j) d += adj.a[static_cast<std::size_t>(i) * n + j];
    adj.degree[static_cast<std::size_t>(i)] = d;
  }

  // GCN propagation: Dhat^{-1/2} (A+I) Dhat^{-1/2}, Dhat_ii >= 1 always.
  adj.gcn_norm.assign(adj.a.size(), 0.0);
  std::vector<double> dhat_inv_sqrt(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    dhat_inv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(adj.degree[static_cast<std::size_t>(i)] + 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double ahat = adj.a[static_cast<std::size_t>(i) * n + j] + (i == j ? 1.0 : 0.0);
      adj.gcn_norm[static_cast<std::size_t>(i) * n + j] =
          dhat_inv_sqrt[static_cast<std::size_t>(i)] * ahat * dhat_inv_sqrt[static_cast<std::size_t>(j)];
    }

  // GCS propagation: D^{-1/2} A D^{-1/2} without self loops; isolated nodes
  // contribute zero rows and rely on the skip term.
  adj.gcs_norm.assign(adj.a.size(), 0.0);
  std::vector<double> d_inv_sqrt(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    if (adj.degree[static_cast<std::size_t>(i)] > 0.0)
      d_inv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(adj.degree[static_cast<std::size_t>(i)]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      adj.gcs_norm[static_cast<std::size_t>(i) * n + j] = d_inv_sqrt[static_cast<std::size_t>(i)] *
                                                          adj.a[static_cast<std::size_t>(i) * n + j] *
                                                          d_inv_sqrt[static_cast<std::size_t>(j)];

  adj.neighbor.assign(adj.a.size(), 0.0);
  for (std::size_t i = 0; i < adj.a.size(); ++i) adj.neighbor[i] = adj.a[i] > 0.0 ? 1.0 : 0.0;
  return adj;
}

SharedAdjacency adjacency_from_dataset(const std::vector<const float*>& epochs, int channels,
                                       std::int64_t samples_per_epoch,
                                       std::vector<std::string> channel_names) {
  if (epochs.size() < 2 && !(epochs.size() == 1 && samples_per_epoch >= 2))
    throw std::invalid_argument("adjacency: need at least 2 samples per channel");
  const std::int64_t total = static_cast<std::int64_t>(epochs.size()) * samples_per_epoch;

  // Channel means over the concatenated dataset.
  std::vector<double> mean(static_cast<std::size_t>(channels), 0.0);
  for (const float* ep : epochs)
    for (int c = 0; c < channels; ++c) {
      const float* row = ep + static_cast<std::int64_t>(c) * samples_per_epoch;
      double acc = 0.0;
      for (std::int64_t t = 0; t < samples_per_epoch; ++t) acc += static_cast<double>(row[t]);
      mean[static_cast<std::size_t>(c)] += acc;
    }
  for (auto& m : mean) m /= static_cast<double>(total);

  std::vector<double> cov(static_cast<std::size_t>(channels) * channels, 0.0);
  std::vector<double> centered(static_cast<std::size_t>(channels));
  for (const float* ep : epochs)
    for (std::int64_t t = 0; t < samples_per_epoch; ++t) {
      for (int c = 0; c < channels; ++c)
        centered[static_cast<std::size_t>(c)] =
            static_cast<double>(ep[static_cast<std::int64_t>(c) * samples_per_epoch + t]) -
            mean[static_cast<std::size_t>(c)];
      for (int i = 0; i < channels; ++i)
        for (int j = i; j < channels; ++j)
          cov[static_cast<std::size_t>(i) * channels + j] +=
              centered[static_cast<std::size_t>(i)] * centered[static_cast<std::size_t>(j)];
    }

  SharedAdjacency out;
  std::vector<double> a(static_cast<std::size_t>(channels) * channels, 0.0);
  std::vector<bool> degenerate(static_cast<std::size_t>(channels), false);
  for (int c = 0; c < channels; ++c)
    if (cov[static_cast<std::size_t>(c) * channels + c] <= 0.0) {
      degenerate[static_cast<std::size_t>(c)] = true;
      if (!channel_names.empty())
        out.zero_variance_channels.push_back(channel_names[static_cast<std::size_t>(c)]);
      else
        out.zero_variance_channels.push_back("ch" + std::to_string(c));
    }
  for (int i = 0; i < channels; ++i)
    for (int j = i + 1; j < channels; ++j) {
      double r = 0.0;
      if (!degenerate[static_cast<std::size_t>(i)] && !degenerate[static_cast<std::size_t>(j)]) {
        r = cov[static_cast<std::size_t>(i) * channels + j] /
            std::sqrt(cov[static_cast<std::size_t>(i) * channels + i] *
                      cov[static_cast<std::size_t>(j) * channels + j]);
        r = std::min(1.0, std::max(-1.0, r));
      }
      a[static_cast<std::size_t>(i) * channels + j] = std::abs(r);
      a[static_cast<std::size_t>(j) * channels + i] = std::abs(r);
    }

  auto adj = SharedAdjacency::from_matrix(channels, std::move(a));
  adj.zero_variance_channels = std::move(out.zero_variance_channels);
  return adj;
}

}  // namespace neurospike
