#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ota/checkpoint.hpp"
#include "ota/report.hpp"

namespace fs = std::filesystem;
using namespace ota;

namespace {

struct CliConfig {
  std::string data;
  std::string out = ".";
  std::string variant = "ota";
  std::string embeddings;
  std::string checkpoint;
  std::string abbreviations;
  std::string slang;
  uint64_t seed = 42;
  int min_frequency = 1;
  long long sample_size = 3000;
  ModelConfig model;
  TrainConfig train;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* kValidKeys =
    "data, out, seed, variant, embeddings, checkpoint, abbreviations, slang, "
    "min_frequency, sample_size, d_model, encoder_blocks, encoder_heads, max_seq_len, "
    "learning_rate, beta1, beta2, weight_decay, epsilon, batch_size, max_epochs, "
    "patience, label_smoothing, folds, validation_fraction";

template <typename T>
T parse_number(const std::string& value, int lineno, const std::string& key) {
  std::istringstream in(value);
  T out{};
  char extra = 0;
  if (!(in >> out) || in >> extra)
    throw ConfigError("config line " + std::to_string(lineno) + ": value `" + value +
                      "` for key `" + key + "` is not a valid number");
  return out;
}

void apply_key(CliConfig& cfg, const std::string& key, const std::string& value, int lineno) {
  if (key == "data") cfg.data = value;
  else if (key == "out") cfg.out = value;
  else if (key == "variant") cfg.variant = value;
  else if (key == "embeddings") cfg.embeddings = value;
  else if (key == "checkpoint") cfg.checkpoint = value;
  else if (key == "abbreviations") cfg.abbreviations = value;
  else if (key == "slang") cfg.slang = value;
  else if (key == "seed") cfg.seed = parse_number<uint64_t>(value, lineno, key);
  else if (key == "min_frequency") cfg.min_frequency = parse_number<int>(value, lineno, key);
  else if (key == "sample_size") cfg.sample_size = parse_number<long long>(value, lineno, key);
  else if (key == "d_model") cfg.model.d_model = parse_number<int>(value, lineno, key);
  else if (key == "encoder_blocks")
    cfg.model.encoder_blocks = parse_number<int>(value, lineno, key);
  else if (key == "encoder_heads")
    cfg.model.encoder_heads = parse_number<int>(value, lineno, key);
  else if (key == "max_seq_len") cfg.model.max_seq_len = parse_number<int>(value, lineno, key);
  else if (key == "learning_rate")
    cfg.train.learning_rate = parse_number<double>(value, lineno, key);
  else if (key == "beta1") cfg.train.beta1 = parse_number<double>(value, lineno, key);
  else if (key == "beta2") cfg.train.beta2 = parse_number<double>(value, lineno, key);
  else if (key == "weight_decay")
    cfg.train.weight_decay = parse_number<double>(value, lineno, key);
  else if (key == "epsilon") cfg.train.epsilon = parse_number<double>(value, lineno, key);
  else if (key == "batch_size") cfg.train.batch_size = parse_number<int>(value, lineno, key);
  else if (key == "max_epochs") cfg.train.max_epochs = parse_number<int>(value, lineno, key);
  else if (key == "patience") cfg.train.patience = parse_number<int>(value, lineno, key);
  else if (key == "label_smoothing")
    cfg.train.label_smoothing = parse_number<double>(value, lineno, key);
  else if (key == "folds") cfg.train.folds = parse_number<int>(value, lineno, key);
  else if (key == "validation_fraction")
    cfg.train.validation_fraction = parse_number<double>(value, lineno, key);
  else
    throw ConfigError("config line " + std::to_string(lineno) + ": unknown key `" + key +
                      "`; valid keys: " + kValidKeys);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void load_config_file(CliConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected `key = value`, got `" + t + "`");
    apply_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)), lineno);
  }
}

json config_echo(const CliConfig& cfg) {
  json j;
  j["data"] = cfg.data;
  j["out"] = cfg.out;
  j["seed"] = cfg.seed;
  j["variant"] = cfg.variant;
  j["embeddings"] = cfg.embeddings;
  j["checkpoint"] = cfg.checkpoint;
  j["abbreviations"] = cfg.abbreviations;
  j["slang"] = cfg.slang;
  j["min_frequency"] = cfg.min_frequency;
  j["sample_size"] = cfg.sample_size;
  j["model"] = {{"d_model", cfg.model.d_model},
                {"encoder_blocks", cfg.model.encoder_blocks},
                {"encoder_heads", cfg.model.encoder_heads},
                {"max_seq_len", cfg.model.max_seq_len},
                {"precomputed_embeddings", cfg.model.precomputed_embeddings}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"weight_decay", cfg.train.weight_decay},
                {"epsilon", cfg.train.epsilon},
                {"batch_size", cfg.train.batch_size},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"label_smoothing", cfg.train.label_smoothing},
                {"folds", cfg.train.folds},
                {"validation_fraction", cfg.train.validation_fraction}};
  return j;
}

// exit 2 on missing inputs or unwritable output
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw InputError(std::string(what) + " path is required");
  if (!fs::exists(path)) throw InputError(std::string(what) + " not found: " + path);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << content;
}

std::pair<std::string, std::string> report_paths(const CliConfig& cfg,
                                                 const std::string& command) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  const std::string stem =
      cfg.out + "/" + command + "_seed" + std::to_string(cfg.seed);
  return {stem + ".json", stem + ".txt"};
}

void emit(const CliConfig& cfg, const std::string& command, json payload,
          const std::string& table) {
  json report;
  report["command"] = command;
  report["config"] = config_echo(cfg);
  report["payload"] = std::move(payload);
  const auto [json_path, txt_path] = report_paths(cfg, command);
  write_text(json_path, report.dump(2) + "\n");
  write_text(txt_path, table);
  std::cout << "wrote " << json_path << " and " << txt_path << "\n";
}

Variant parse_variant(const std::string& v) {
  if (v == "ota") return Variant::Ota;
  if (v == "baseline") return Variant::Baseline;
  throw ConfigError("variant must be `ota` or `baseline`, got `" + v + "`");
}

std::optional<EmbeddingFile> maybe_embeddings(CliConfig& cfg) {
  if (cfg.embeddings.empty()) return std::nullopt;
  require_file(cfg.embeddings, "embedding file");
  cfg.model.precomputed_embeddings = true;
  return EmbeddingFile::load(cfg.embeddings, cfg.model.d_model);
}

int run_crossval(CliConfig& cfg) {
  require_file(cfg.data, "dataset");
  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  auto emb = maybe_embeddings(cfg);
  LabeledCorpus corpus = load_corpus(cfg.data);
  Vocab vocab = build_vocab(corpus, cfg.min_frequency);
  CvReport r = cross_validate(corpus, vocab, cfg.model, parse_variant(cfg.variant),
                              cfg.train, emb ? &*emb : nullptr);
  emit(cfg, "crossval", to_json(r), cv_table(r));
  return 0;
}

int run_train(CliConfig& cfg) {
  require_file(cfg.data, "dataset");
  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  auto emb = maybe_embeddings(cfg);
  LabeledCorpus corpus = load_corpus(cfg.data);
  Vocab vocab = build_vocab(corpus, cfg.min_frequency);
  vocab.min_frequency = cfg.min_frequency;
  Model model(cfg.model, parse_variant(cfg.variant), vocab.size(),
              RngStream(cfg.seed, "train_init").next_u64());
  std::vector<int> rows(corpus.size());
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  TrainResult tr = train_fold(model, corpus, vocab, rows, cfg.train,
                              RngStream(cfg.seed, "train"), emb ? &*emb : nullptr);

  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  const std::string ckpt_path =
      cfg.out + "/train_seed" + std::to_string(cfg.seed) + ".ckpt.json";
  save_checkpoint(ckpt_path, model, vocab);

  json payload;
  payload["checkpoint"] = ckpt_path;
  payload["best_epoch"] = tr.best_epoch;
  payload["best_val_f1"] = tr.best_val_f1;
  payload["epochs_run"] = tr.epochs_run;
  json hist = json::array();
  for (const auto& e : tr.history)
    hist.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_f1", e.val_f1}});
  payload["history"] = std::move(hist);

  std::ostringstream table;
  table << "epoch  train_loss  val_f1\n";
  for (const auto& e : tr.history) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%5d  %10.6f  %6.4f\n", e.epoch, e.train_loss, e.val_f1);
    table << buf;
  }
  emit(cfg, "train", std::move(payload), table.str());
  return 0;
}

int run_evaluate(CliConfig& cfg) {
  require_file(cfg.data, "dataset");
  require_file(cfg.checkpoint, "checkpoint");
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  cfg.model = ck.model.config();
  auto emb = maybe_embeddings(cfg);
  LabeledCorpus corpus = load_corpus(cfg.data);
  std::vector<int> rows(corpus.size());
  std::vector<int> labels(corpus.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    rows[i] = static_cast<int>(i);
    labels[i] = corpus.samples[i].label;
  }
  std::vector<int> preds =
      predict_rows(ck.model, corpus, ck.vocab, rows, emb ? &*emb : nullptr);
  MetricsReport m = evaluate_metrics(preds, labels);
  emit(cfg, "evaluate", to_json(m), metrics_table(m));
  return 0;
}

int run_perturb(CliConfig& cfg) {
  require_file(cfg.data, "dataset");
  require_file(cfg.checkpoint, "checkpoint");
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  cfg.model = ck.model.config();
  auto emb = maybe_embeddings(cfg);
  LabeledCorpus corpus = load_corpus(cfg.data);
  SubstitutionTable abbrev = cfg.abbreviations.empty()
                                 ? default_abbreviation_table()
                                 : load_substitution_table(cfg.abbreviations, "abbreviation");
  SubstitutionTable slang = cfg.slang.empty()
                                ? default_slang_table()
                                : load_substitution_table(cfg.slang, "slang");
  RobustnessReport r =
      robustness_suite(ck.model, corpus, ck.vocab, standard_protocol(), cfg.sample_size,
                       cfg.seed, abbrev, slang, emb ? &*emb : nullptr);
  emit(cfg, "perturb", to_json(r), robustness_table(r));
  return 0;
}

int run_analyze(CliConfig& cfg) {
  require_file(cfg.data, "dataset");
  LabeledCorpus corpus = load_corpus(cfg.data);
  auto summary = class_feature_summary(corpus);
  DivergenceMatrix m = pairwise_divergence(corpus);
  json payload;
  payload["feature_summary"] = to_json(summary);
  payload["divergence"] = to_json(m);
  emit(cfg, "analyze", std::move(payload),
       feature_summary_table(summary) + "\n" + divergence_csv(m));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-stream ontology-aware hate speech classifier"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> data, out, variant, embeddings, checkpoint, config_path;
  std::optional<std::string> abbreviations, slang;
  std::optional<uint64_t> seed;
  std::optional<int> d_model, max_epochs, batch_size, folds, max_seq_len, min_frequency;
  std::optional<double> learning_rate;
  std::optional<long long> sample_size;

  app.add_option("--config", config_path, "config file of key = value lines");
  app.add_option("--data", data, "dataset CSV (text,label)");
  app.add_option("--out", out, "output directory for reports");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--variant", variant, "ota | baseline");
  app.add_option("--embeddings", embeddings, "precomputed embedding file");
  app.add_option("--checkpoint", checkpoint, "model checkpoint (evaluate/perturb)");
  app.add_option("--abbreviations", abbreviations, "abbreviation table file");
  app.add_option("--slang", slang, "slang table file");
  app.add_option("--d-model", d_model, "embedding width");
  app.add_option("--max-seq-len", max_seq_len, "maximum sequence length");
  app.add_option("--max-epochs", max_epochs, "epoch cap per fold");
  app.add_option("--batch-size", batch_size, "minibatch size");
  app.add_option("--learning-rate", learning_rate, "AdamW learning rate");
  app.add_option("--folds", folds, "cross-validation folds");
  app.add_option("--min-frequency", min_frequency, "vocabulary frequency cutoff");
  app.add_option("--sample-size", sample_size, "robustness sample size");

  auto* crossval = app.add_subcommand("crossval", "stratified k-fold cross-validation");
  auto* train = app.add_subcommand("train", "train one model on the full dataset");
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  auto* perturb = app.add_subcommand("perturb", "robustness protocol on a checkpoint");
  auto* analyze = app.add_subcommand("analyze", "corpus feature and divergence analysis");

  CLI11_PARSE(app, argc, argv);

  try {
    CliConfig cfg;
    if (config_path) load_config_file(cfg, *config_path);
    // flags take precedence over file values
    if (data) cfg.data = *data;
    if (out) cfg.out = *out;
    if (seed) cfg.seed = *seed;
    if (variant) cfg.variant = *variant;
    if (embeddings) cfg.embeddings = *embeddings;
    if (checkpoint) cfg.checkpoint = *checkpoint;
    if (abbreviations) cfg.abbreviations = *abbreviations;
    if (slang) cfg.slang = *slang;
    if (d_model) cfg.model.d_model = *d_model;
    if (max_seq_len) cfg.model.max_seq_len = *max_seq_len;
    if (max_epochs) cfg.train.max_epochs = *max_epochs;
    if (batch_size) cfg.train.batch_size = *batch_size;
    if (learning_rate) cfg.train.learning_rate = *learning_rate;
    if (folds) cfg.train.folds = *folds;
    if (min_frequency) cfg.min_frequency = *min_frequency;
    if (sample_size) cfg.sample_size = *sample_size;

    if (crossval->parsed()) return run_crossval(cfg);
    if (train->parsed()) return run_train(cfg);
    if (evaluate->parsed()) return run_evaluate(cfg);
    if (perturb->parsed()) return run_perturb(cfg);
    if (analyze->parsed()) return run_analyze(cfg);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ValueError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
