#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "neurospike/datasets.hpp"
#include "neurospike/graph.hpp"
#include "neurospike/loss.hpp"
#include "neurospike/spiking.hpp"
#include "neurospike/stats.hpp"
#include "neurospike/tensor.hpp"

namespace neurospike {

struct FoldResult {
  double acc = 0.0, tpr = 0.0, tnr = 0.0;  // percentages
  int epochs_trained = 0;
  long tp = 0, tn = 0, fp = 0, fn = 0;
};

struct TrainConfig {
  int folds = 10;
  int max_epochs = 1000;
  int patience = 50;
  double improvement_tol = 1e-6;
  int batch = 8;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool paired_ttest = false;
  CsnnConfig csnn;
  GnnConfig gnn;
};

struct FoldSplit {
  std::vector<int> train, test;
};

// Shuffled stratified split: test folds partition the index set and per-fold
// class counts stay within one sample of exact proportionality.
std::vector<FoldSplit> stratified_kfold(const std::vector<int>& labels, int k,
                                        std::uint64_t seed);

ClassWeights class_weights(const std::vector<int>& labels);

struct EarlyStopper {
  int patience;
  double tol;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  EarlyStopper(int patience_, double tol_) : patience(patience_), tol(tol_) {}

  bool update(double loss, int epoch) {
    if (loss < best - tol) {
      best = loss;
      best_epoch = epoch;
      stale = 0;
      return true;
    }
    ++stale;
    return false;
  }

  bool should_stop() const { return stale >= patience; }
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string name() const = 0;
  virtual int units() const = 0;  // 2 for argmax heads, 1 for sigmoid heads
  virtual Tensor<float> forward_batch(const EpochDataset& ds, const std::vector<int>& idx) = 0;
  virtual std::vector<Tensor<float>*> params() = 0;
  virtual int predict(const float* row) const = 0;
};

// model name in {csnn, cnn, gcn, gcs, gin}. Weight init draws from the
// fold-independent "init" stream of cfg.seed; GNN adjacency is estimated from
// the training fold only.
std::unique_ptr<Classifier> make_classifier(const std::string& name, const EpochDataset& ds,
                                            const std::vector<int>& train_idx,
                                            const TrainConfig& cfg);

struct TrainResult {
  int epochs_trained = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> loss_curve;
};

// Returning true from the callback ends training after the current epoch
// (used by callers that watch an external criterion).
using EpochCallback = std::function<bool(int epoch, double train_loss)>;

// Mini-batch training with class-weighted BCE and Adam; stops at max_epochs
// or when the best epoch loss has not improved by improvement_tol for
// `patience` consecutive epochs. Best-loss weights are restored on exit.
TrainResult train_model(Classifier& model, const EpochDataset& ds,
                        const std::vector<int>& train_idx, const ClassWeights& cw,
                        const TrainConfig& cfg, int fold_index,
                        const EpochCallback& on_epoch = {});

FoldResult evaluate(Classifier& model, const EpochDataset& ds, const std::vector<int>& test_idx);

// Fraction of correct predictions (used for train-accuracy probes).
double accuracy(Classifier& model, const EpochDataset& ds, const std::vector<int>& idx);

struct MetricSummary {
  double mean = 0.0, sd = 0.0;
};

struct ModelSummary {
  std::string name;
  std::vector<FoldResult> folds;
  MetricSummary acc, tpr, tnr, epochs;
  bool has_p = false;
  double p_acc = 1.0, p_tpr = 1.0, p_tnr = 1.0;
  double threshold = -1.0;       // sweep rows only
  double spike_density = -1.0;   // sweep rows only
};

struct ExperimentReport {
  std::vector<ModelSummary> models;
  std::string config_json = "{}";
  std::uint64_t seed = 0;
  std::string dataset_hash;

  std::string to_json() const;
  std::string to_csv() const;
};

ModelSummary summarize(const std::string& name, const std::vector<FoldResult>& folds);
void attach_p_values(ModelSummary& row, const ModelSummary& reference, bool paired);

std::vector<FoldResult> run_cv(const std::string& model_name, const EpochDataset& ds,
                               const TrainConfig& cfg);

// Per-model 10-fold results with Welch (or paired) p-values against the first
// model.
ExperimentReport run_comparison(const EpochDataset& ds, const std::vector<std::string>& models,
                                const TrainConfig& cfg);

// Encode-then-train sweep over delta-modulation thresholds; p-values are
// taken against the threshold with the best mean accuracy.
ExperimentReport run_threshold_sweep(const EpochDataset& ds, const std::vector<double>& thresholds,
                                     const TrainConfig& cfg);

}  // namespace neurospike
