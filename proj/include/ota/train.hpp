#pragma once

#include <array>
#include <string>
#include <vector>

#include "ota/data.hpp"
#include "ota/model.hpp"
#include "ota/params.hpp"

namespace ota {

struct TrainConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  double epsilon = 1e-8;
  int batch_size = 16;
  int max_epochs = 20;
  int patience = 3;
  double label_smoothing = 0.1;
  int folds = 5;
  double validation_fraction = 0.1;
  uint64_t seed = 42;

  void validate() const;
};

// Per-parameter Adam moments; step counter increments once per step().
class AdamW {
 public:
  explicit AdamW(const ParamStore& params);
  void step(ParamStore& params, const TrainConfig& cfg);
  int64_t step_count() const { return t_; }

 private:
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

// Patience rule: stop after `patience` consecutive epochs without strict
// improvement of the monitored metric.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // returns true when this epoch improved on the best
  bool observe(double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = -1.0;
  int best_epoch_ = -1;
  int epoch_ = -1;
  int since_best_ = 0;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  std::array<std::array<long long, kNumClasses>, kNumClasses> confusion{};  // [true][pred]
  long long total = 0;
};

MetricsReport evaluate_metrics(const std::vector<int>& preds, const std::vector<int>& labels);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  int epochs_run = 0;
};

// Trains in place on `train_indices` (row indices into corpus); an internal
// stratified validation_fraction carve-out drives early stopping. On return
// the model holds the best-F1 parameters.
TrainResult train_fold(Model& model, const LabeledCorpus& corpus, const Vocab& vocab,
                       const std::vector<int>& train_indices, const TrainConfig& cfg,
                       RngStream fold_rng, const EmbeddingFile* embeddings = nullptr);

// Eval-mode predictions over arbitrary rows, batched.
std::vector<int> predict_rows(Model& model, const LabeledCorpus& corpus, const Vocab& vocab,
                              const std::vector<int>& rows,
                              const EmbeddingFile* embeddings = nullptr,
                              const std::vector<std::string>* texts = nullptr);

struct FoldReport {
  MetricsReport metrics;
  int epochs_run = 0;
  int best_epoch = 0;
  double wall_time_s = 0.0;
};

struct CvReport {
  std::vector<FoldReport> folds;
  double mean_accuracy = 0.0, std_accuracy = 0.0;
  double mean_f1 = 0.0, std_f1 = 0.0;
  // pooled over all held-out folds (each sample tested exactly once)
  MetricsReport pooled;
};

CvReport cross_validate(const LabeledCorpus& corpus, const Vocab& vocab,
                        const ModelConfig& mcfg, Variant variant, const TrainConfig& cfg,
                        const EmbeddingFile* embeddings = nullptr);

}  // namespace ota
