#include "ota/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ota {

namespace {

// fixed-precision numbers keep report bytes reproducible across runs
double round6(double v) { return std::round(v * 1e6) / 1e6; }

std::string fmt(double v, int width, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%*.*f", width, prec, v);
  return buf;
}

}  // namespace

json to_json(const MetricsReport& m) {
  json per_class = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& pc = m.per_class[static_cast<size_t>(c)];
    per_class[kLabelNames[static_cast<size_t>(c)]] = {
        {"precision", round6(pc.precision)},
        {"recall", round6(pc.recall)},
        {"f1", round6(pc.f1)},
        {"support", pc.support},
    };
  }
  json confusion = json::array();
  for (int t = 0; t < kNumClasses; ++t) {
    json row = json::array();
    for (int p = 0; p < kNumClasses; ++p)
      row.push_back(m.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)]);
    confusion.push_back(row);
  }
  return {
      {"accuracy", round6(m.accuracy)},
      {"precision_weighted", round6(m.precision_weighted)},
      {"recall_weighted", round6(m.recall_weighted)},
      {"f1_weighted", round6(m.f1_weighted)},
      {"per_class", per_class},
      {"confusion", confusion},
      {"total", m.total},
  };
}

json to_json(const CvReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({
        {"metrics", to_json(f.metrics)},
        {"epochs", f.epochs_run},
        {"best_epoch", f.best_epoch},
    });
  return {
      {"folds", folds},
      {"mean_accuracy", round6(r.mean_accuracy)},
      {"std_accuracy", round6(r.std_accuracy)},
      {"mean_f1", round6(r.mean_f1)},
      {"std_f1", round6(r.std_f1)},
      {"pooled", to_json(r.pooled)},
  };
}

json to_json(const RobustnessReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({
        {"kind", row.kind},
        {"rate", round6(row.rate)},
        {"accuracy", round6(row.accuracy)},
        {"f1_weighted", round6(row.f1_weighted)},
        {"delta_accuracy", round6(row.delta_accuracy)},
        {"delta_f1", round6(row.delta_f1)},
        {"unmodified", row.unmodified},
    });
  return {{"sample_size", r.sample_size}, {"rows", rows}};
}

json to_json(const std::array<ClassFeatureMeans, kNumClasses>& summary) {
  json out = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& m = summary[static_cast<size_t>(c)];
    out[kLabelNames[static_cast<size_t>(c)]] = {
        {"samples", m.count},
        {"mean_chars", round6(m.chars)},
        {"mean_tokens", round6(m.tokens)},
        {"mean_nouns_approx", round6(m.nouns)},
        {"mean_verbs_approx", round6(m.verbs)},
        {"mean_urls", round6(m.url)},
    };
  }
  return out;
}

json to_json(const DivergenceMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < kNumClasses; ++i) {
    json row = json::array();
    for (int j = 0; j < kNumClasses; ++j)
      row.push_back(round6(m.values[static_cast<size_t>(i)][static_cast<size_t>(j)]));
    rows.push_back(row);
  }
  return {
      {"classes", {kLabelNames[0], kLabelNames[1], kLabelNames[2], kLabelNames[3],
                   kLabelNames[4]}},
      {"matrix", rows},
      {"off_diagonal_mean", round6(m.off_diagonal_mean())},
  };
}

std::string metrics_table(const MetricsReport& m) {
  std::ostringstream os;
  os << "Class          F1      Acc*    Prec    Rec     Support\n";
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& pc = m.per_class[static_cast<size_t>(c)];
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %7.4f %7.4f %7.4f %7.4f %9lld\n",
                  kLabelNames[static_cast<size_t>(c)], pc.f1, pc.recall, pc.precision,
                  pc.recall, pc.support);
    os << buf;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %7.4f %7.4f %7.4f %7.4f %9lld\n", "weighted_avg",
                m.f1_weighted, m.accuracy, m.precision_weighted, m.recall_weighted, m.total);
  os << buf;
  os << "* per-class Acc is per-class recall; the weighted_avg Acc column is overall accuracy\n";
  return os.str();
}

std::string cv_table(const CvReport& r) {
  std::ostringstream os;
  os << "Fold   Accuracy  F1_weighted  Epochs  BestEpoch\n";
  for (size_t f = 0; f < r.folds.size(); ++f) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%4zu   %8.4f  %11.4f  %6d  %9d\n", f + 1,
                  r.folds[f].metrics.accuracy, r.folds[f].metrics.f1_weighted,
                  r.folds[f].epochs_run, r.folds[f].best_epoch);
    os << buf;
  }
  os << "mean   " << fmt(r.mean_accuracy, 8, 4) << "  " << fmt(r.mean_f1, 11, 4) << "\n";
  os << "std    " << fmt(r.std_accuracy, 8, 4) << "  " << fmt(r.std_f1, 11, 4) << "\n";
  os << "\nPooled test predictions:\n" << metrics_table(r.pooled);
  return os.str();
}

std::string robustness_table(const RobustnessReport& r) {
  std::ostringstream os;
  os << "Perturbation      Level   Acc      F1       dAcc     dF1      Unmodified\n";
  for (const auto& row : r.rows) {
    char buf[200];
    if (row.kind == "clean")
      std::snprintf(buf, sizeof(buf),
                    "%-16s  %5s   %7.4f  %7.4f  %7s  %7s  %10lld\n", row.kind.c_str(), "--",
                    row.accuracy, row.f1_weighted, "--", "--", row.unmodified);
    else
      std::snprintf(buf, sizeof(buf),
                    "%-16s  %4.0f%%   %7.4f  %7.4f  %+7.4f  %+7.4f  %10lld\n",
                    row.kind.c_str(), row.rate * 100.0, row.accuracy, row.f1_weighted,
                    row.delta_accuracy, row.delta_f1, row.unmodified);
    os << buf;
  }
  return os.str();
}

std::string feature_summary_table(const std::array<ClassFeatureMeans, kNumClasses>& summary) {
  std::ostringstream os;
  os << "Class         Samples   Chars     Tokens   Nouns~   Verbs~   URLs\n";
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& m = summary[static_cast<size_t>(c)];
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-12s %8lld  %8.2f  %7.2f  %7.2f  %7.2f  %5.3f\n",
                  kLabelNames[static_cast<size_t>(c)], m.count, m.chars, m.tokens, m.nouns,
                  m.verbs, m.url);
    os << buf;
  }
  os << "~ noun/verb counts come from a bundled lexicon and are approximate\n";
  return os.str();
}

std::string divergence_csv(const DivergenceMatrix& m) {
  std::ostringstream os;
  os << "class";
  for (int j = 0; j < kNumClasses; ++j) os << "," << kLabelNames[static_cast<size_t>(j)];
  os << "\n";
  for (int i = 0; i < kNumClasses; ++i) {
    os << kLabelNames[static_cast<size_t>(i)];
    for (int j = 0; j < kNumClasses; ++j)
      os << "," << fmt(m.values[static_cast<size_t>(i)][static_cast<size_t>(j)], 0, 6);
    os << "\n";
  }
  return os.str();
}

}  // namespace ota
