#include "neurospike/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "neurospike/adam.hpp"
#include "neurospike/layers.hpp"

using nlohmann::json;

namespace neurospike {

std::vector<FoldSplit> stratified_kfold(const std::vector<int>& labels, int k,
                                        std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  std::vector<std::vector<int>> by_class(2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("stratified_kfold: labels must be 0/1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < 2; ++c) {
    if (static_cast<int>(by_class[static_cast<std::size_t>(c)].size()) < k)
      throw std::invalid_argument("stratified_kfold: class " + std::to_string(c) +
                                  " has fewer than k samples");
    Rng rng = stream_rng(seed, "kfold-shuffle", static_cast<std::uint64_t>(c));
    rng.shuffle(by_class[static_cast<std::size_t>(c)]);
  }

  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (int c = 0; c < 2; ++c) {
    const auto& pool = by_class[static_cast<std::size_t>(c)];
    const std::size_t n = pool.size();
    for (int f = 0; f < k; ++f) {
      const std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(k);
      const std::size_t hi = n * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(k);
      for (std::size_t i = lo; i < hi; ++i)
        folds[static_cast<std::size_t>(f)].test.push_back(pool[i]);
    }
  }
  for (int f = 0; f < k; ++f) {
    auto& fold = folds[static_cast<std::size_t>(f)];
    std::vector<bool> in_test(labels.size(), false);
    for (int i : fold.test) in_test[static_cast<std::size_t>(i)] = true;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (!in_test[i]) fold.train.push_back(static_cast<int>(i));
  }
  return folds;
}

ClassWeights class_weights(const std::vector<int>& labels) {
  long n0 = 0, n1 = 0;
  for (int l : labels) (l == 1 ? n1 : n0)++;
  return ClassWeights::from_counts(n0, n1);
}

// ---------------------------------------------------------------------------
// Classifiers
// ---------------------------------------------------------------------------

namespace {

Tensor<float> batch_as_image(const EpochDataset& ds, const std::vector<int>& idx) {
  const int B = static_cast<int>(idx.size());
  const int C = ds.channels;
  const long L = ds.length;
  auto x = Tensor<float>::zeros({B, 1, C, static_cast<int>(L)});
  float* out = x.data();
  const std::size_t per = static_cast<std::size_t>(C) * static_cast<std::size_t>(L);
  for (int b = 0; b < B; ++b) {
    const std::size_t i = static_cast<std::size_t>(idx[static_cast<std::size_t>(b)]);
    if (ds.spikes) {
      const auto& t = ds.trains[i];
      for (std::size_t k = 0; k < per; ++k) out[static_cast<std::size_t>(b) * per + k] = t[k];
    } else {
      const auto& e = ds.epochs[i];
      std::copy(e.begin(), e.end(), out + static_cast<std::size_t>(b) * per);
    }
  }
  return x;
}

class CsnnClassifier final : public Classifier {
 public:
  CsnnClassifier(const EpochDataset& ds, const TrainConfig& cfg) {
    Rng rng = stream_rng(cfg.seed, "init");
    model_ = std::make_unique<CsnnModel<float>>(ds.channels, static_cast<int>(ds.length),
                                                cfg.csnn, rng);
  }
  std::string name() const override { return "csnn"; }
  int units() const override { return 2; }
  Tensor<float> forward_batch(const EpochDataset& ds, const std::vector<int>& idx) override {
    return model_->forward(batch_as_image(ds, idx));
  }
  std::vector<Tensor<float>*> params() override { return model_->params(); }
  int predict(const float* row) const override { return row[1] > row[0] ? 1 : 0; }
  CsnnModel<float>& model() { return *model_; }

 private:
  std::unique_ptr<CsnnModel<float>> model_;
};

class CnnClassifier final : public Classifier {
 public:
  CnnClassifier(const EpochDataset& ds, const TrainConfig& cfg) {
    Rng rng = stream_rng(cfg.seed, "init");
    dims_ = conv_stack_dims(ds.channels, static_cast<int>(ds.length), cfg.csnn.conv2_filters);
    conv1_.init(1, cfg.csnn.conv1_filters, cfg.csnn.kernel, rng);
    conv2_.init(cfg.csnn.conv1_filters, cfg.csnn.conv2_filters, cfg.csnn.kernel, rng);
    fc_.init(dims_.flat, 2, rng);
  }
  std::string name() const override { return "cnn"; }
  int units() const override { return 2; }
  Tensor<float> forward_batch(const EpochDataset& ds, const std::vector<int>& idx) override {
    auto x = batch_as_image(ds, idx);
    auto h1 = maxpool2d(conv1_.forward(x));
    auto h2 = maxpool2d(conv2_.forward(h1));
    auto flat = reshape(h2, {x.dim(0), dims_.flat});
    return fc_.forward(flat, Activation::kSigmoid);
  }
  std::vector<Tensor<float>*> params() override {
    return {&conv1_.kernels, &conv1_.bias, &conv2_.kernels, &conv2_.bias, &fc_.weight, &fc_.bias};
  }
  int predict(const float* row) const override { return row[1] > row[0] ? 1 : 0; }

 private:
  ConvStackDims dims_{};
  Conv2dLayer<float> conv1_, conv2_;
  DenseLayer<float> fc_;
};

class GnnClassifier final : public Classifier {
 public:
  GnnClassifier(GnnVariant variant, const EpochDataset& ds, const std::vector<int>& train_idx,
                const TrainConfig& cfg) {
    std::vector<std::vector<float>> storage;
    std::vector<const float*> train_epochs;
    for (int i : train_idx) {
      if (ds.spikes) {
        storage.push_back(ds.as_floats(static_cast<std::size_t>(i)));
        train_epochs.push_back(storage.back().data());
      } else {
        train_epochs.push_back(ds.epochs[static_cast<std::size_t>(i)].data());
      }
    }
    std::vector<std::string> names;
    for (const auto& e : kMontage1020) names.push_back(e.name);
    adjacency_ = adjacency_from_dataset(train_epochs, ds.channels, ds.length, names);
    GnnConfig gc = cfg.gnn;
    gc.variant = variant;
    Rng rng = stream_rng(cfg.seed, "init");
    model_ = std::make_unique<GnnModel<float>>(gc, adjacency_, static_cast<int>(ds.length), rng);
  }
  std::string name() const override { return gnn_variant_name(model_->cfg.variant); }
  int units() const override { return 1; }
  Tensor<float> forward_batch(const EpochDataset& ds, const std::vector<int>& idx) override {
    std::vector<Tensor<float>> outs;
    outs.reserve(idx.size());
    for (int i : idx) {
      auto x = Tensor<float>::of({ds.channels, static_cast<int>(ds.length)},
                                 ds.as_floats(static_cast<std::size_t>(i)));
      outs.push_back(model_->forward(x));
    }
    return stack_rows(outs);
  }
  std::vector<Tensor<float>*> params() override { return model_->params(); }
  int predict(const float* row) const override { return row[0] > 0.5f ? 1 : 0; }
  const SharedAdjacency& adjacency() const { return adjacency_; }

 private:
  SharedAdjacency adjacency_;
  std::unique_ptr<GnnModel<float>> model_;
};

void build_targets(const EpochDataset& ds, const std::vector<int>& idx, int units,
                   const ClassWeights& cw, Tensor<float>& targets, Tensor<float>& weights) {
  const int B = static_cast<int>(idx.size());
  targets = Tensor<float>::zeros({B, units});
  weights = Tensor<float>::zeros({B, units});
  for (int b = 0; b < B; ++b) {
    const int label = ds.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
    const float w = static_cast<float>(label == 1 ? cw.w1 : cw.w0);
    if (units == 2) {
      targets.data()[b * 2 + label] = 1.0f;
      weights.data()[b * 2] = w;
      weights.data()[b * 2 + 1] = w;
    } else {
      targets.data()[b] = static_cast<float>(label);
      weights.data()[b] = w;
    }
  }
}

}  // namespace

std::unique_ptr<Classifier> make_classifier(const std::string& name, const EpochDataset& ds,
                                            const std::vector<int>& train_idx,
                                            const TrainConfig& cfg) {
  if (name == "csnn") return std::make_unique<CsnnClassifier>(ds, cfg);
  if (name == "cnn") return std::make_unique<CnnClassifier>(ds, cfg);
  if (name == "gcn") return std::make_unique<GnnClassifier>(GnnVariant::kGcn, ds, train_idx, cfg);
  if (name == "gcs") return std::make_unique<GnnClassifier>(GnnVariant::kGcs, ds, train_idx, cfg);
  if (name == "gin") return std::make_unique<GnnClassifier>(GnnVariant::kGin, ds, train_idx, cfg);
  throw std::invalid_argument("unknown model '" + name + "' (expected csnn, cnn, gcn, gcs, gin)");
}

TrainResult train_model(Classifier& model, const EpochDataset& ds,
                        const std::vector<int>& train_idx, const ClassWeights& cw,
                        const TrainConfig& cfg, int fold_index, const EpochCallback& on_epoch) {
  if (train_idx.empty()) throw std::invalid_argument("train_model: empty training split");
  auto params = model.params();
  AdamState<float> opt(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  opt.init(params);
  EarlyStopper stopper(cfg.patience, cfg.improvement_tol);

  std::vector<std::vector<float>> best_params;
  auto snapshot = [&] {
    best_params.clear();
    for (auto* p : params) best_params.emplace_back(p->data(), p->data() + p->size());
  };

  TrainResult result;
  std::vector<int> order = train_idx;
  std::vector<int> batch;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng = stream_rng(cfg.seed, "shuffle",
                                 (static_cast<std::uint64_t>(fold_index) << 32) |
                                     static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    long element_count = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch)) {
      batch.assign(order.begin() + static_cast<long>(pos),
                   order.begin() + static_cast<long>(std::min(order.size(),
                                                              pos + static_cast<std::size_t>(cfg.batch))));
      auto pred = model.forward_batch(ds, batch);
      Tensor<float> targets, weights;
      build_targets(ds, batch, model.units(), cw, targets, weights);
      auto loss = weighted_bce(pred, targets, weights);
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv))
        throw std::runtime_error("train_model: non-finite loss at epoch " +
                                 std::to_string(epoch) + " (model " + model.name() + ")");
      for (auto* p : params) p->zero_grad();
      loss.backward();
      adam_step(params, opt);
      loss_sum += lv * static_cast<double>(pred.size());
      element_count += pred.size();
    }
    const double epoch_loss = loss_sum / static_cast<double>(element_count);
    result.loss_curve.push_back(epoch_loss);
    result.epochs_trained = epoch;
    if (stopper.update(epoch_loss, epoch)) snapshot();
    if (on_epoch && on_epoch(epoch, epoch_loss)) break;
    if (stopper.should_stop()) break;
  }

  if (!best_params.empty())
    for (std::size_t i = 0; i < params.size(); ++i)
      std::copy(best_params[i].begin(), best_params[i].end(), params[i]->data());
  result.best_loss = stopper.best;
  return result;
}

FoldResult evaluate(Classifier& model, const EpochDataset& ds, const std::vector<int>& test_idx) {
  if (test_idx.empty()) throw std::invalid_argument("evaluate: empty test split");
  NoGradGuard ng;
  FoldResult r;
  constexpr std::size_t kEvalBatch = 32;
  std::vector<int> batch;
  const int units = model.units();
  for (std::size_t pos = 0; pos < test_idx.size(); pos += kEvalBatch) {
    batch.assign(test_idx.begin() + static_cast<long>(pos),
                 test_idx.begin() + static_cast<long>(std::min(test_idx.size(), pos + kEvalBatch)));
    auto pred = model.forward_batch(ds, batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const int label = ds.labels[static_cast<std::size_t>(batch[b])];
      const int guess = model.predict(pred.data() + b * static_cast<std::size_t>(units));
      if (label == 1)
        (guess == 1 ? r.tp : r.fn)++;
      else
        (guess == 0 ? r.tn : r.fp)++;
    }
  }
  const double total = static_cast<double>(r.tp + r.tn + r.fp + r.fn);
  r.acc = 100.0 * static_cast<double>(r.tp + r.tn) / total;
  r.tpr = (r.tp + r.fn) ? 100.0 * static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.tnr = (r.tn + r.fp) ? 100.0 * static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp) : 0.0;
  return r;
}

double accuracy(Classifier& model, const EpochDataset& ds, const std::vector<int>& idx) {
  auto r = evaluate(model, ds, idx);
  return (static_cast<double>(r.tp + r.tn)) / static_cast<double>(r.tp + r.tn + r.fp + r.fn);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

MetricSummary summarize_metric(const std::vector<double>& xs) {
  MetricSummary m;
  m.mean = sample_mean(xs);
  m.sd = xs.size() >= 2 ? sample_sd(xs) : 0.0;
  return m;
}

std::vector<double> metric_values(const std::vector<FoldResult>& folds, double FoldResult::*field) {
  std::vector<double> out;
  out.reserve(folds.size());
  for (const auto& f : folds) out.push_back(f.*field);
  return out;
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

ModelSummary summarize(const std::string& name, const std::vector<FoldResult>& folds) {
  ModelSummary s;
  s.name = name;
  s.folds = folds;
  s.acc = summarize_metric(metric_values(folds, &FoldResult::acc));
  s.tpr = summarize_metric(metric_values(folds, &FoldResult::tpr));
  s.tnr = summarize_metric(metric_values(folds, &FoldResult::tnr));
  std::vector<double> ep;
  for (const auto& f : folds) ep.push_back(f.epochs_trained);
  s.epochs = summarize_metric(ep);
  return s;
}

void attach_p_values(ModelSummary& row, const ModelSummary& reference, bool paired) {
  auto test = [&](double FoldResult::*field) {
    auto a = metric_values(reference.folds, field);
    auto b = metric_values(row.folds, field);
    return paired ? paired_ttest(a, b).p : welch_ttest(a, b).p;
  };
  row.p_acc = test(&FoldResult::acc);
  row.p_tpr = test(&FoldResult::tpr);
  row.p_tnr = test(&FoldResult::tnr);
  row.has_p = true;
}

std::vector<FoldResult> run_cv(const std::string& model_name, const EpochDataset& ds,
                               const TrainConfig& cfg) {
  const auto folds = stratified_kfold(ds.labels, cfg.folds, cfg.seed);
  const ClassWeights cw = class_weights(ds.labels);
  std::vector<FoldResult> results(folds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t f = next.fetch_add(1);
      if (f >= folds.size()) return;
      auto model = make_classifier(model_name, ds, folds[f].train, cfg);
      auto tr = train_model(*model, ds, folds[f].train, cw, cfg, static_cast<int>(f));
      FoldResult r = evaluate(*model, ds, folds[f].test);
      r.epochs_trained = tr.epochs_trained;
      results[f] = r;
    }
  };

  const int jobs = std::max(1, std::min(cfg.jobs, static_cast<int>(folds.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

ExperimentReport run_comparison(const EpochDataset& ds, const std::vector<std::string>& models,
                                const TrainConfig& cfg) {
  if (models.empty()) throw std::invalid_argument("run_comparison: need at least one model");
  ExperimentReport report;
  report.seed = cfg.seed;
  report.dataset_hash = ds.hash();
  for (const auto& name : models)
    report.models.push_back(summarize(name, run_cv(name, ds, cfg)));
  for (std::size_t i = 1; i < report.models.size(); ++i)
    attach_p_values(report.models[i], report.models[0], cfg.paired_ttest);
  return report;
}

ExperimentReport run_threshold_sweep(const EpochDataset& ds, const std::vector<double>& thresholds,
                                     const TrainConfig& cfg) {
  if (ds.spikes)
    throw std::invalid_argument("run_threshold_sweep: input must be floating-point epochs");
  if (thresholds.empty()) throw std::invalid_argument("run_threshold_sweep: no thresholds");
  ExperimentReport report;
  report.seed = cfg.seed;
  report.dataset_hash = ds.hash();
  for (double theta : thresholds) {
    double density = 0.0;
    auto spike_ds = encode_dataset(ds, theta, &density);
    auto row = summarize("csnn@theta=" + format_g(theta), run_cv("csnn", spike_ds, cfg));
    row.threshold = theta;
    row.spike_density = density;
    report.models.push_back(std::move(row));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.models.size(); ++i)
    if (report.models[i].acc.mean > report.models[best].acc.mean) best = i;
  for (std::size_t i = 0; i < report.models.size(); ++i)
    if (i != best) attach_p_values(report.models[i], report.models[best], cfg.paired_ttest);
  return report;
}

std::string ExperimentReport::to_json() const {
  json j;
  j["seed"] = seed;
  j["dataset_hash"] = dataset_hash;
  j["config"] = json::parse(config_json);
  j["models"] = json::array();
  for (const auto& m : models) {
    json jm;
    jm["name"] = m.name;
    jm["folds"] = json::array();
    for (const auto& f : m.folds)
      jm["folds"].push_back({{"acc", f.acc},
                             {"tpr", f.tpr},
                             {"tnr", f.tnr},
                             {"epochs", f.epochs_trained},
                             {"confusion", {{"tp", f.tp}, {"tn", f.tn}, {"fp", f.fp}, {"fn", f.fn}}}});
    jm["mean"] = {{"acc", m.acc.mean}, {"tpr", m.tpr.mean}, {"tnr", m.tnr.mean}, {"epochs", m.epochs.mean}};
    jm["sd"] = {{"acc", m.acc.sd}, {"tpr", m.tpr.sd}, {"tnr", m.tnr.sd}, {"epochs", m.epochs.sd}};
    if (m.has_p)
      jm["p_vs_ref"] = {{"acc", m.p_acc}, {"tpr", m.p_tpr}, {"tnr", m.p_tnr}};
    else
      jm["p_vs_ref"] = nullptr;
    if (m.threshold >= 0.0) {
      jm["threshold"] = m.threshold;
      jm["spike_density"] = m.spike_density;
    }
    j["models"].push_back(std::move(jm));
  }
  return j.dump(2) + "\n";
}

std::string ExperimentReport::to_csv() const {
  std::string out =
      "model,acc_mean,acc_sd,acc_p,tpr_mean,tpr_sd,tpr_p,tnr_mean,tnr_sd,tnr_p,epochs_mean,epochs_sd\n";
  for (const auto& m : models) {
    out += m.name;
    auto cell = [&](double v) { out += "," + format_g(v); };
    auto pcell = [&](double p) { out += m.has_p ? "," + format_g(p) : ",NA"; };
    cell(m.acc.mean);
    cell(m.acc.sd);
    pcell(m.p_acc);
    cell(m.tpr.mean);
    cell(m.tpr.sd);
    pcell(m.p_tpr);
    cell(m.tnr.mean);
    cell(m.tnr.sd);
    pcell(m.p_tnr);
    cell(m.epochs.mean);
    cell(m.epochs.sd);
    out += "\n";
  }
  return out;
}

}  // namespace neurospike
