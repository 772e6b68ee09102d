// Acceptance gate: one pass/fail line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "ota/analysis.hpp"
#include "ota/gradcheck.hpp"
#include "ota/perturb.hpp"
#include "ota/report.hpp"
#include "ota/train.hpp"

namespace fs = std::filesystem;
using namespace ota;

namespace {

int failures = 0;

void report(int criterion, const char* name, bool ok, const std::string& detail = "") {
  std::printf("criterion %2d [%s] %s%s%s\n", criterion, ok ? "PASS" : "FAIL", name,
              detail.empty() ? "" : ": ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void report_skip(int criterion, const char* name, const std::string& why) {
  std::printf("criterion %2d [SKIP] %s: %s\n", criterion, name, why.c_str());
  std::fflush(stdout);
}

EncodedBatch toy_batch(int batch, int len, int vocab_size, uint64_t seed) {
  EncodedBatch b;
  b.batch = batch;
  b.len = len;
  RngStream rng(seed, "accept_batch");
  for (int i = 0; i < batch; ++i) {
    const int real = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(len)));
    for (int t = 0; t < len; ++t) {
      const bool on = t < real;
      b.token_ids.push_back(
          on ? 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(vocab_size - 2)))
             : Vocab::kPad);
      b.mask.push_back(on ? 1 : 0);
    }
    b.labels.push_back(static_cast<int>(rng.uniform_int(kNumClasses)));
    b.sample_ids.push_back(i);
  }
  return b;
}

// keyword corpora for the scaled experiments
LabeledCorpus synthetic_corpus(int per_class, bool overlapping, uint64_t seed) {
  const char* kw[5] = {"young", "heritage", "identity", "faith", "misc"};
  const char* fillers[8] = {"the", "quick", "brown", "words", "appear",
                            "here", "daily", "often"};
  RngStream gen(seed, "corpus");
  std::string csv = "text,label\n";
  for (int i = 0; i < per_class; ++i)
    for (int c = 0; c < 5; ++c) {
      std::string t = std::string(kw[c]) + " " + kw[c];
      if (overlapping)  // plant a neighboring class's keyword in half the rows
        if (gen.uniform(0, 1) < 0.5) t += std::string(" ") + kw[(c + 1) % 5];
      for (int j = 0; j < 3; ++j) t += std::string(" ") + fillers[gen.uniform_int(8)];
      csv += t + "," + kLabelNames[static_cast<size_t>(c)] + "\n";
    }
  return load_corpus_from_string(csv);
}

double brute_force_weighted_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
  double out = 0.0;
  const double total = static_cast<double>(labels.size());
  for (int c = 0; c < kNumClasses; ++c) {
    long long tp = 0, fp = 0, fn = 0, support = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) {
        ++support;
        if (preds[i] == c) ++tp; else ++fn;
      } else if (preds[i] == c) {
        ++fp;
      }
    }
    const double p = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    out += static_cast<double>(support) / total * f1;
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.d_model = 6;
  cfg.encoder_blocks = 1;
  cfg.encoder_heads = 2;
  cfg.max_seq_len = 4;
  Model m(cfg, Variant::Ota, 10, 77);
  EncodedBatch b = toy_batch(4, 4, 10, 5);
  auto loss_fn = [&](GradTape* tape) {
    RngStream drop(123, "dropcheck");
    Tensor logits = m.forward(b, Mode::Train, tape, &drop);
    return smoothed_cross_entropy(logits, b.labels, 0.1, tape);
  };
  GradCheckReport r = grad_check(m.params(), loss_fn, 1e-5, 4, 42);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof(detail), "max rel err %.2e over %d coords in %.1fs",
                r.max_rel_err, r.coords_checked, secs);
  report(1, "end-to-end gradient integrity", r.pass(1e-4) && secs < 60.0, detail);
}

void criterion_2() {
  Tensor norm = normalize_adjacency(build_ontology().adjacency);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(norm.at(i, j) - 0.2));
  RngStream rng(5, "axprop");
  Tensor x({5, 7});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2.0, 2.0);
  Tensor ax = matmul(norm, x);
  double worst_prop = 0.0;
  for (int j = 0; j < 7; ++j) {
    double mean = 0.0;
    for (int i = 0; i < 5; ++i) mean += x.at(i, j);
    mean /= 5.0;
    for (int i = 0; i < 5; ++i)
      worst_prop = std::max(worst_prop, std::abs(ax.at(i, j) - mean));
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "max dev %.1e, propagation dev %.1e", worst,
                worst_prop);
  report(2, "GCN normalized-adjacency closed form", worst <= 1e-12 && worst_prop <= 1e-12,
         detail);
}

void criterion_3() {
  const double expected[5][6] = {
      {1.0, 0.0, 0.0, 0.0, 0.7, 0.3}, {1.0, 1.0, 0.0, 0.0, 0.6, 0.7},
      {1.0, 0.0, 1.0, 0.0, 0.6, 0.5}, {1.0, 1.0, 0.0, 1.0, 0.9, 0.8},
      {0.5, 0.5, 0.5, 0.5, 0.4, 0.9},
  };
  OntologyGraph g = build_ontology();
  int exact = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 6; ++j)
      if (g.node_features.at(i, j) == expected[i][j]) ++exact;
  report(3, "ontology node-feature constants", exact == 30,
         std::to_string(exact) + "/30 exact");
}

void criterion_4() {
  ModelConfig cfg;
  cfg.d_model = 768;
  cfg.precomputed_embeddings = true;
  Model m(cfg, Variant::Ota, 2, 0);
  const bool ok = cfg.fused_width() == 800 &&
                  m.params()["head.1.w"].shape() == std::vector<int>{800, 400} &&
                  m.params()["head.2.w"].shape() == std::vector<int>{400, 200} &&
                  m.params()["head.3.w"].shape() == std::vector<int>{200, 5};
  report(4, "d_model=768 head geometry 800-400-200-5", ok);
}

void criterion_5() {
  Tensor uniform = Tensor::zeros({2, 5});
  bool ok = true;
  for (double alpha : {0.0, 0.1, 0.5}) {
    Tensor loss = smoothed_cross_entropy(uniform, {0, 3}, alpha);
    ok = ok && std::abs(loss[0] - std::log(5.0)) <= 1e-9;
  }
  Tensor logits = Tensor::from(
      {1, 5}, {std::log(0.6), std::log(0.1), std::log(0.1), std::log(0.1), std::log(0.1)});
  Tensor l = smoothed_cross_entropy(logits, {0}, 0.1);
  const double expected = -0.92 * std::log(0.6) - 0.08 * std::log(0.1);
  ok = ok && std::abs(l[0] - expected) <= 1e-4 && std::abs(l[0] - 0.6541) <= 1e-4;
  report(5, "label-smoothed loss oracles", ok);
}

void criterion_6() {
  TrainConfig cfg;
  ParamStore p;
  Tensor w({1}, true);
  w[0] = 0.5;
  p.insert("w", std::move(w), true);
  p["w"].grad()[0] = 0.2;
  AdamW opt(p);
  opt.step(p, cfg);
  const double step1 = 0.5 - 1e-5 * (0.2 / (std::sqrt(0.04) + 1e-8));
  const double expected = step1 - 1e-5 * 1e-5 * step1;
  bool ok = std::abs(p["w"][0] - expected) <= 1e-12;

  ParamStore z;
  Tensor zw({1}, true);
  zw[0] = 2.0;
  z.insert("w", std::move(zw), true);
  AdamW zopt(z);
  zopt.step(z, cfg);
  ok = ok && std::abs(z["w"][0] - 2.0 * (1.0 - 1e-10)) <= 1e-15;
  report(6, "AdamW hand-traced step", ok);
}

void criterion_7() {
  MetricsReport r = evaluate_metrics({0, 1, 1, 1, 1}, {0, 0, 1, 1, 1});
  bool ok = std::abs(r.f1_weighted - 82.0 / 105.0) <= 1e-12;
  RngStream rng(29, "metrics");
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(40));
    std::vector<int> preds, labels;
    for (int i = 0; i < n; ++i) {
      preds.push_back(static_cast<int>(rng.uniform_int(5)));
      labels.push_back(static_cast<int>(rng.uniform_int(5)));
    }
    if (evaluate_metrics(preds, labels).f1_weighted != brute_force_weighted_f1(preds, labels))
      ++mismatches;
  }
  ok = ok && mismatches == 0;
  report(7, "weighted-F1 metrics oracle", ok,
         std::to_string(mismatches) + "/1000 randomized mismatches");
}

void criterion_8() {
  // Defaults cannot train a from-scratch encoder at lr=1e-5 in 20 epochs, so
  // the experiment overrides the learning rate (3e-3) and trims max_seq_len
  // to the corpus (8). Everything else is the default configuration.
  const auto t0 = std::chrono::steady_clock::now();
  LabeledCorpus corpus = synthetic_corpus(100, false, 123);
  Vocab vocab = build_vocab(corpus, 1);
  ModelConfig mcfg;
  mcfg.max_seq_len = 8;
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.seed = 42;
  CvReport r = cross_validate(corpus, vocab, mcfg, Variant::Ota, cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof(detail), "mean accuracy %.4f over 5 folds in %.1fs",
                r.mean_accuracy, secs);
  report(8, "learning sanity on 500-sample separable corpus",
         r.mean_accuracy >= 0.95 && secs < 600.0, detail);
}

void criterion_9() {
  LabeledCorpus corpus = synthetic_corpus(50, true, 321);
  Vocab vocab = build_vocab(corpus, 1);
  ModelConfig mcfg;
  mcfg.max_seq_len = 8;
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.max_epochs = 10;
  cfg.seed = 7;
  CvReport ota_run = cross_validate(corpus, vocab, mcfg, Variant::Ota, cfg);
  CvReport base_run = cross_validate(corpus, vocab, mcfg, Variant::Baseline, cfg);
  char detail[160];
  std::snprintf(detail, sizeof(detail), "ota F1 %.4f vs baseline F1 %.4f", ota_run.mean_f1,
                base_run.mean_f1);
  report(9, "ota non-inferiority on overlapping keywords",
         ota_run.mean_f1 >= base_run.mean_f1 - 0.01, detail);
}

void criterion_10() {
  LabeledCorpus corpus = synthetic_corpus(6, false, 55);
  Vocab vocab = build_vocab(corpus, 1);
  ModelConfig mcfg;
  mcfg.d_model = 8;
  mcfg.encoder_blocks = 1;
  mcfg.max_seq_len = 8;
  Model model(mcfg, Variant::Ota, vocab.size(), 9);

  RobustnessReport r =
      robustness_suite(model, corpus, vocab, standard_protocol(), 30, 17,
                       default_abbreviation_table(), default_slang_table());
  bool ok = r.rows.size() == 19 && r.rows[0].kind == "clean";
  const char* order[6] = {"char_delete", "char_substitute", "char_insert",
                          "word_delete", "abbreviation",    "slang"};
  for (int g = 0; g < 6 && ok; ++g)
    for (int i = 0; i < 3; ++i)
      ok = ok && r.rows[static_cast<size_t>(1 + g * 3 + i)].kind == order[g];

  // rate-0 protocol reproduces the clean metrics exactly
  std::vector<PerturbSpec> zeros;
  for (PerturbSpec s : standard_protocol()) zeros.push_back({s.kind, 0.0});
  RobustnessReport rz = robustness_suite(model, corpus, vocab, zeros, 30, 17,
                                         default_abbreviation_table(), default_slang_table());
  for (const auto& row : rz.rows)
    ok = ok && row.accuracy == rz.rows[0].accuracy &&
         row.f1_weighted == rz.rows[0].f1_weighted && row.unmodified == rz.sample_size;

  // higher char-perturbation rates never leave more samples unmodified
  for (int g = 0; g < 3 && ok; ++g)
    for (int i = 1; i < 3; ++i)
      ok = ok && r.rows[static_cast<size_t>(1 + g * 3 + i)].unmodified <=
                     r.rows[static_cast<size_t>(1 + g * 3 + i - 1)].unmodified;
  report(10, "robustness harness shape and rate semantics", ok);
}

void criterion_11() {
  UnigramModel pp;
  pp.probs = {{"a", 1.0}};
  UnigramModel qq;
  qq.probs = {{"a", 0.5}, {"b", 0.5}};
  const double expected =
      0.5 * std::log2(4.0 / 3.0) + 0.5 * (0.5 * std::log2(2.0 / 3.0) + 0.5);
  bool ok = std::abs(js_divergence(pp, qq) - expected) <= 1e-9 &&
            std::abs(js_divergence(pp, qq) - 0.311278) <= 1e-6;
  ok = ok && js_divergence(pp, pp) == 0.0;
  UnigramModel d1, d2;
  d1.probs = {{"x", 0.5}, {"y", 0.5}};
  d2.probs = {{"w", 0.5}, {"z", 0.5}};
  ok = ok && std::abs(js_divergence(d1, d2) - 1.0) <= 1e-12;

  LabeledCorpus corpus = synthetic_corpus(4, true, 77);
  DivergenceMatrix m = pairwise_divergence(corpus);
  for (int i = 0; i < 5; ++i) {
    ok = ok && m.values[static_cast<size_t>(i)][static_cast<size_t>(i)] == 0.0;
    for (int j = 0; j < 5; ++j)
      ok = ok && m.values[static_cast<size_t>(i)][static_cast<size_t>(j)] ==
                     m.values[static_cast<size_t>(j)][static_cast<size_t>(i)];
  }
  report(11, "Jensen-Shannon divergence oracles", ok);
}

void criterion_12() {
  const fs::path tmp = fs::temp_directory_path() / "ota_acceptance_12";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);
  const fs::path data = tmp / "toy.csv";
  {
    LabeledCorpus corpus = synthetic_corpus(8, false, 99);
    std::ofstream out(data, std::ios::binary);
    out << "text,label\n";
    for (const auto& s : corpus.samples)
      out << s.raw_text << "," << kLabelNames[static_cast<size_t>(s.label)] << "\n";
  }
  const std::string cmd = std::string(OTA_CLI_PATH) + " crossval --data " + data.string() +
                          " --out " + (tmp / "rep").string() +
                          " --seed 11 --d-model 8 --max-seq-len 6 --max-epochs 2"
                          " --batch-size 8 --learning-rate 0.003 >/dev/null 2>&1";
  bool ok = std::system(cmd.c_str()) == 0;
  const std::string first = slurp(tmp / "rep" / "crossval_seed11.json");
  ok = ok && std::system(cmd.c_str()) == 0;
  const std::string second = slurp(tmp / "rep" / "crossval_seed11.json");
  ok = ok && !first.empty() && first == second;
  fs::remove_all(tmp, ec);
  report(12, "byte-identical JSON reports across reruns", ok);
}

void criterion_13() {
  const char* path = std::getenv("OTA_DATASET");
  if (!path || !fs::exists(path)) {
    report_skip(13, "full-dataset conditional checks",
                "set OTA_DATASET to the dataset CSV to enable");
    return;
  }
  try {
    LabeledCorpus corpus = load_corpus(path);
    const long long expected[5] = {7998, 7992, 7973, 7961, 7823};
    bool ok = true;
    for (int c = 0; c < 5; ++c)
      ok = ok && corpus.class_counts[static_cast<size_t>(c)] == expected[c];
    DivergenceMatrix m = pairwise_divergence(corpus);
    const double mean = m.off_diagonal_mean();
    ok = ok && std::abs(mean - 0.466) <= 0.05;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "counts %lld/%lld/%lld/%lld/%lld, divergence mean %.4f",
                  corpus.class_counts[0], corpus.class_counts[1], corpus.class_counts[2],
                  corpus.class_counts[3], corpus.class_counts[4], mean);
    report(13, "full-dataset conditional checks", ok, detail);
  } catch (const std::exception& e) {
    report(13, "full-dataset conditional checks", false, e.what());
  }
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  criterion_13();
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  else std::printf("all criteria passed\n");
  return failures == 0 ? 0 : 1;
}
