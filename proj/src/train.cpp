#include "ota/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace ota {

void TrainConfig::validate() const {
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw ValueError("TrainConfig: label_smoothing must be in [0,1)");
  if (patience < 1) throw ValueError("TrainConfig: patience must be >= 1");
  if (batch_size < 2) throw ValueError("TrainConfig: batch_size must be >= 2 (batch norm)");
  if (max_epochs < 1) throw ValueError("TrainConfig: max_epochs must be >= 1");
  if (folds < 2) throw ValueError("TrainConfig: folds must be >= 2");
  if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
    throw ValueError("TrainConfig: validation_fraction must be in (0,1)");
  if (learning_rate <= 0.0) throw ValueError("TrainConfig: learning_rate must be positive");
}

AdamW::AdamW(const ParamStore& params) {
  m_.resize(params.count());
  v_.resize(params.count());
  for (size_t i = 0; i < params.count(); ++i) {
    m_[i].assign(static_cast<size_t>(params.tensor(i).size()), 0.0);
    v_[i].assign(static_cast<size_t>(params.tensor(i).size()), 0.0);
  }
}

void AdamW::step(ParamStore& params, const TrainConfig& cfg) {
  for (size_t i = 0; i < params.count(); ++i)
    for (double g : params.tensor(i).grad())
      if (!std::isfinite(g))
        throw ValueError("AdamW: non-finite gradient in " + params.name(i) + ", step aborted");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.count(); ++i) {
    Tensor& p = params.tensor(i);
    const auto& g = p.grad();
    const bool decay = params.decays(i);
    for (size_t j = 0; j < g.size(); ++j) {
      m_[i][j] = cfg.beta1 * m_[i][j] + (1.0 - cfg.beta1) * g[j];
      v_[i][j] = cfg.beta2 * v_[i][j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      double& theta = p[static_cast<int64_t>(j)];
      theta -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      if (decay) theta -= cfg.learning_rate * cfg.weight_decay * theta;
    }
  }
}

bool EarlyStopper::observe(double metric) {
  ++epoch_;
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

MetricsReport evaluate_metrics(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw ValueError("evaluate_metrics: prediction/label length mismatch");
  MetricsReport r;
  r.total = static_cast<long long>(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = preds[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses)
      throw ValueError("evaluate_metrics: class index outside [0,5)");
    r.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)] += 1;
  }
  long long correct = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    long long tp = r.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
    long long fp = 0, fn = 0, support = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      support += r.confusion[static_cast<size_t>(c)][static_cast<size_t>(o)];
      if (o != c) {
        fp += r.confusion[static_cast<size_t>(o)][static_cast<size_t>(c)];
        fn += r.confusion[static_cast<size_t>(c)][static_cast<size_t>(o)];
      }
    }
    correct += tp;
    ClassMetrics& m = r.per_class[static_cast<size_t>(c)];
    m.support = support;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
  }
  if (r.total > 0) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
    for (int c = 0; c < kNumClasses; ++c) {
      const double w = static_cast<double>(r.per_class[static_cast<size_t>(c)].support) /
                       static_cast<double>(r.total);
      r.precision_weighted += w * r.per_class[static_cast<size_t>(c)].precision;
      r.recall_weighted += w * r.per_class[static_cast<size_t>(c)].recall;
      r.f1_weighted += w * r.per_class[static_cast<size_t>(c)].f1;
    }
  }
  return r;
}

std::vector<int> predict_rows(Model& model, const LabeledCorpus& corpus, const Vocab& vocab,
                              const std::vector<int>& rows, const EmbeddingFile* embeddings,
                              const std::vector<std::string>* texts) {
  std::vector<int> preds;
  preds.reserve(rows.size());
  const int chunk = 64;
  for (size_t start = 0; start < rows.size(); start += chunk) {
    const size_t end = std::min(rows.size(), start + chunk);
    std::vector<int> slice(rows.begin() + static_cast<long>(start),
                           rows.begin() + static_cast<long>(end));
    std::vector<std::string> text_slice;
    const std::vector<std::string>* text_ptr = nullptr;
    if (texts) {
      text_slice.assign(texts->begin() + static_cast<long>(start),
                        texts->begin() + static_cast<long>(end));
      text_ptr = &text_slice;
    }
    EncodedBatch b =
        encode_batch(corpus, slice, vocab, model.config().max_seq_len, text_ptr);
    auto p = model.predict(b, embeddings);
    preds.insert(preds.end(), p.begin(), p.end());
  }
  return preds;
}

namespace {

double weighted_f1_on(Model& model, const LabeledCorpus& corpus, const Vocab& vocab,
                      const std::vector<int>& rows, const EmbeddingFile* embeddings) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (int r : rows) labels.push_back(corpus.samples[static_cast<size_t>(r)].label);
  return evaluate_metrics(predict_rows(model, corpus, vocab, rows, embeddings), labels)
      .f1_weighted;
}

}  // namespace

TrainResult train_fold(Model& model, const LabeledCorpus& corpus, const Vocab& vocab,
                       const std::vector<int>& train_indices, const TrainConfig& cfg,
                       RngStream fold_rng, const EmbeddingFile* embeddings) {
  cfg.validate();
  std::vector<int> all_labels(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) all_labels[i] = corpus.samples[i].label;

  RngStream split_rng = fold_rng.fork("val_split");
  auto [val_rows, fit_rows] =
      stratified_split(train_indices, all_labels, cfg.validation_fraction, split_rng);

  AdamW optimizer(model.params());
  EarlyStopper stopper(cfg.patience);
  ParamStore best = model.params().clone();
  std::map<std::string, BatchNormState> best_bn = model.bn_states();

  TrainResult result;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    RngStream shuffle_rng = fold_rng.fork("shuffle", static_cast<uint64_t>(epoch));
    RngStream dropout_rng = fold_rng.fork("dropout", static_cast<uint64_t>(epoch));
    std::vector<int> order = fit_rows;
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    // batch boundaries; a trailing singleton is merged into the previous
    // batch (batch norm needs B >= 2)
    std::vector<std::pair<size_t, size_t>> batches;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size))
      batches.emplace_back(start,
                           std::min(order.size(), start + static_cast<size_t>(cfg.batch_size)));
    if (batches.size() >= 2 && batches.back().second - batches.back().first == 1) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    double loss_sum = 0.0;
    long long seen = 0;
    for (auto [start, end] : batches) {
      std::vector<int> rows(order.begin() + static_cast<long>(start),
                            order.begin() + static_cast<long>(end));
      EncodedBatch batch = encode_batch(corpus, rows, vocab, model.config().max_seq_len);
      model.params().zero_grads();
      GradTape tape;
      Tensor logits = model.forward(batch, Mode::Train, &tape, &dropout_rng, embeddings);
      Tensor loss =
          smoothed_cross_entropy(logits, batch.labels, cfg.label_smoothing, &tape);
      tape.backward(loss);
      optimizer.step(model.params(), cfg);
      loss_sum += loss[0] * static_cast<double>(rows.size());
      seen += static_cast<long long>(rows.size());
    }

    const double val_f1 = weighted_f1_on(model, corpus, vocab, val_rows, embeddings);
    result.history.push_back(
        {epoch + 1, seen ? loss_sum / static_cast<double>(seen) : 0.0, val_f1});
    if (stopper.observe(val_f1)) {
      best.copy_values_from(model.params());
      best_bn = model.bn_states();
    }
    result.epochs_run = epoch + 1;
    if (stopper.should_stop()) break;
  }

  model.params().copy_values_from(best);
  model.bn_states() = best_bn;
  result.best_epoch = stopper.best_epoch() + 1;
  result.best_val_f1 = stopper.best();
  return result;
}

CvReport cross_validate(const LabeledCorpus& corpus, const Vocab& vocab,
                        const ModelConfig& mcfg, Variant variant, const TrainConfig& cfg,
                        const EmbeddingFile* embeddings) {
  cfg.validate();
  std::vector<int> labels(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) labels[i] = corpus.samples[i].label;

  RngStream master(cfg.seed, "crossval");
  RngStream fold_split_rng = master.fork("folds");
  FoldAssignment fa = stratified_folds(labels, cfg.folds, fold_split_rng);

  CvReport report;
  std::vector<int> pooled_preds, pooled_labels;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<int> test_rows, train_rows;
    for (size_t i = 0; i < fa.fold_of.size(); ++i)
      (fa.fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<int>(i));

    const auto t0 = std::chrono::steady_clock::now();
    Model model(mcfg, variant, vocab.size(),
                master.fork("init", static_cast<uint64_t>(f)).next_u64());
    TrainResult tr = train_fold(model, corpus, vocab, train_rows, cfg,
                                master.fork("fold", static_cast<uint64_t>(f)), embeddings);
    std::vector<int> test_labels;
    for (int r : test_rows) test_labels.push_back(corpus.samples[static_cast<size_t>(r)].label);
    std::vector<int> preds = predict_rows(model, corpus, vocab, test_rows, embeddings);
    const auto t1 = std::chrono::steady_clock::now();

    FoldReport fr;
    fr.metrics = evaluate_metrics(preds, test_labels);
    fr.epochs_run = tr.epochs_run;
    fr.best_epoch = tr.best_epoch;
    fr.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    report.folds.push_back(std::move(fr));
    pooled_preds.insert(pooled_preds.end(), preds.begin(), preds.end());
    pooled_labels.insert(pooled_labels.end(), test_labels.begin(), test_labels.end());
  }

  report.pooled = evaluate_metrics(pooled_preds, pooled_labels);
  const auto mean_std = [&](auto getter, double& mean, double& sd) {
    double s = 0.0;
    for (const auto& fr : report.folds) s += getter(fr);
    mean = s / static_cast<double>(report.folds.size());
    double v = 0.0;
    for (const auto& fr : report.folds) v += (getter(fr) - mean) * (getter(fr) - mean);
    sd = std::sqrt(v / static_cast<double>(report.folds.size()));
  };
  mean_std([](const FoldReport& fr) { return fr.metrics.accuracy; }, report.mean_accuracy,
           report.std_accuracy);
  mean_std([](const FoldReport& fr) { return fr.metrics.f1_weighted; }, report.mean_f1,
           report.std_f1);
  return report;
}

}  // namespace ota
