#include "ota/perturb.hpp"

#include <algorithm>
#include <cmath>

#include "ota/errors.hpp"
#include "ota/text.hpp"

namespace ota {

const char* perturb_kind_name(PerturbKind k) {
  switch (k) {
    case PerturbKind::CharDelete: return "char_delete";
    case PerturbKind::CharSubstitute: return "char_substitute";
    case PerturbKind::CharInsert: return "char_insert";
    case PerturbKind::WordDelete: return "word_delete";
    case PerturbKind::Abbreviation: return "abbreviation";
    case PerturbKind::Slang: return "slang";
  }
  return "?";
}

namespace {

bool is_space_cp(uint32_t cp) { return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r'; }

// k distinct values from [0,n), ascending (partial Fisher-Yates)
std::vector<size_t> sample_without_replacement(size_t n, size_t k, RngStream& rng) {
  std::vector<size_t> pool(n);
  for (size_t i = 0; i < n; ++i) pool[i] = i;
  for (size_t i = 0; i < k; ++i)
    std::swap(pool[i], pool[i + rng.uniform_int(n - i)]);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::string perturb_chars(const std::string& text, CharMode mode, double rate,
                          RngStream& rng) {
  if (rate < 0.0 || rate > 1.0) throw ValueError("perturb_chars: rate must be in [0,1]");
  const std::vector<uint32_t> cps = utf8_decode(text);
  std::vector<size_t> eligible;  // non-whitespace positions
  for (size_t i = 0; i < cps.size(); ++i)
    if (!is_space_cp(cps[i])) eligible.push_back(i);
  const size_t n = static_cast<size_t>(std::floor(rate * static_cast<double>(eligible.size())));
  if (n == 0) return text;
  const std::vector<size_t> chosen = sample_without_replacement(eligible.size(), n, rng);
  std::vector<bool> selected(cps.size(), false);
  for (size_t c : chosen) selected[eligible[c]] = true;

  std::vector<uint32_t> out;
  out.reserve(cps.size() + n);
  for (size_t i = 0; i < cps.size(); ++i) {
    if (!selected[i]) {
      out.push_back(cps[i]);
      continue;
    }
    switch (mode) {
      case CharMode::Delete:
        break;
      case CharMode::Substitute: {
        uint32_t repl;
        do {
          repl = static_cast<uint32_t>('a' + rng.uniform_int(26));
        } while (repl == cps[i]);
        out.push_back(repl);
        break;
      }
      case CharMode::Insert:
        out.push_back(cps[i]);
        out.push_back(static_cast<uint32_t>('a' + rng.uniform_int(26)));
        break;
    }
  }
  return utf8_encode(out);
}

std::string perturb_words(const std::string& text, double rate, RngStream& rng) {
  if (rate < 0.0 || rate > 1.0) throw ValueError("perturb_words: rate must be in [0,1]");
  std::vector<std::string> tokens = whitespace_tokens(text);
  const size_t n = static_cast<size_t>(std::floor(rate * static_cast<double>(tokens.size())));
  if (n == 0) return text;
  const std::vector<size_t> chosen = sample_without_replacement(tokens.size(), n, rng);
  std::vector<bool> drop(tokens.size(), false);
  for (size_t c : chosen) drop[c] = true;
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (drop[i]) continue;
    if (!out.empty()) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

namespace {

std::string ascii_lower_copy(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  return out;
}

SubstitutionTable make_table(std::initializer_list<std::pair<const char*, const char*>> rows,
                             const char* kind) {
  SubstitutionTable t;
  t.kind = kind;
  for (const auto& [k, v] : rows) t.entries[k] = v;
  return t;
}

}  // namespace

const SubstitutionTable& default_abbreviation_table() {
  static const SubstitutionTable t = make_table(
      {{"you", "u"},
       {"for", "4"},
       {"to", "2"},
       {"are", "r"},
       {"be", "b"},
       {"great", "gr8"},
       {"people", "ppl"},
       {"because", "bc"},
       {"tonight", "2nite"},
       {"thanks", "thx"}},
      "abbreviation");
  return t;
}

const SubstitutionTable& default_slang_table() {
  static const SubstitutionTable t = make_table(
      {{"very", "hella"},
       {"friend", "homie"},
       {"good", "dope"},
       {"crazy", "wild"},
       {"awesome", "lit"},
       {"money", "bread"},
       {"house", "crib"},
       {"cool", "chill"}},
      "slang");
  return t;
}

SubstitutionTable load_substitution_table(const std::string& path, const std::string& kind) {
  SubstitutionTable t;
  t.kind = kind;
  t.entries = load_mapping_file(path);
  return t;
}

std::string lexical_substitute(const std::string& text, const SubstitutionTable& table,
                               double rate, RngStream& rng) {
  if (rate < 0.0 || rate > 1.0) throw ValueError("lexical_substitute: rate must be in [0,1]");
  std::vector<std::string> tokens = whitespace_tokens(text);
  std::vector<size_t> eligible;
  for (size_t i = 0; i < tokens.size(); ++i)
    if (table.entries.count(ascii_lower_copy(tokens[i]))) eligible.push_back(i);
  const size_t n = static_cast<size_t>(std::floor(rate * static_cast<double>(eligible.size())));
  if (n == 0) return text;
  const std::vector<size_t> chosen = sample_without_replacement(eligible.size(), n, rng);
  for (size_t c : chosen) {
    std::string& tok = tokens[eligible[c]];
    tok = table.entries.at(ascii_lower_copy(tok));
  }
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string apply_perturbation(const std::string& text, const PerturbSpec& spec,
                               RngStream& rng, const SubstitutionTable& abbrev,
                               const SubstitutionTable& slang) {
  switch (spec.kind) {
    case PerturbKind::CharDelete: return perturb_chars(text, CharMode::Delete, spec.rate, rng);
    case PerturbKind::CharSubstitute:
      return perturb_chars(text, CharMode::Substitute, spec.rate, rng);
    case PerturbKind::CharInsert: return perturb_chars(text, CharMode::Insert, spec.rate, rng);
    case PerturbKind::WordDelete: return perturb_words(text, spec.rate, rng);
    case PerturbKind::Abbreviation: return lexical_substitute(text, abbrev, spec.rate, rng);
    case PerturbKind::Slang: return lexical_substitute(text, slang, spec.rate, rng);
  }
  throw ValueError("apply_perturbation: unknown kind");
}

std::vector<PerturbSpec> standard_protocol() {
  std::vector<PerturbSpec> specs;
  const double char_rates[] = {0.05, 0.10, 0.15};
  const double word_rates[] = {0.10, 0.20, 0.30};
  for (double r : char_rates) specs.push_back({PerturbKind::CharDelete, r});
  for (double r : char_rates) specs.push_back({PerturbKind::CharSubstitute, r});
  for (double r : char_rates) specs.push_back({PerturbKind::CharInsert, r});
  for (double r : word_rates) specs.push_back({PerturbKind::WordDelete, r});
  for (double r : word_rates) specs.push_back({PerturbKind::Abbreviation, r});
  for (double r : word_rates) specs.push_back({PerturbKind::Slang, r});
  return specs;
}

RobustnessReport robustness_suite(Model& model, const LabeledCorpus& corpus,
                                  const Vocab& vocab,
                                  const std::vector<PerturbSpec>& protocol,
                                  long long sample_size, uint64_t seed,
                                  const SubstitutionTable& abbrev,
                                  const SubstitutionTable& slang,
                                  const EmbeddingFile* embeddings) {
  if (corpus.size() == 0) throw ValueError("robustness_suite: empty corpus");
  sample_size = std::min<long long>(sample_size, static_cast<long long>(corpus.size()));

  // stratified proportional sample
  RngStream sample_rng(seed, "robustness_sample");
  std::array<std::vector<int>, kNumClasses> by_class;
  for (size_t i = 0; i < corpus.size(); ++i)
    by_class[static_cast<size_t>(corpus.samples[i].label)].push_back(static_cast<int>(i));
  std::vector<int> rows;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[static_cast<size_t>(c)];
    if (idx.empty()) continue;
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[sample_rng.uniform_int(i)]);
    size_t take = static_cast<size_t>(std::llround(
        static_cast<double>(sample_size) * static_cast<double>(idx.size()) /
        static_cast<double>(corpus.size())));
    take = std::min(std::max<size_t>(take, 1), idx.size());
    rows.insert(rows.end(), idx.begin(), idx.begin() + static_cast<long>(take));
  }
  std::sort(rows.begin(), rows.end());

  std::vector<int> labels;
  std::vector<std::string> clean_texts;
  for (int r : rows) {
    labels.push_back(corpus.samples[static_cast<size_t>(r)].label);
    clean_texts.push_back(corpus.samples[static_cast<size_t>(r)].clean_text);
  }

  RobustnessReport report;
  report.sample_size = static_cast<long long>(rows.size());

  MetricsReport clean =
      evaluate_metrics(predict_rows(model, corpus, vocab, rows, embeddings), labels);
  report.rows.push_back({"clean", 0.0, clean.accuracy, clean.f1_weighted, 0.0, 0.0,
                         static_cast<long long>(rows.size())});

  int spec_index = 0;
  for (const PerturbSpec& spec : protocol) {
    ++spec_index;
    std::vector<std::string> perturbed(clean_texts.size());
    long long unmodified = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      // per-sample stream keyed by (seed, sample id, spec) so samples and
      // specs are independently reproducible
      RngStream rng = RngStream(seed, "perturb")
                          .fork(perturb_kind_name(spec.kind),
                                (static_cast<uint64_t>(rows[i]) << 8) ^
                                    static_cast<uint64_t>(spec_index));
      perturbed[i] = apply_perturbation(clean_texts[i], spec, rng, abbrev, slang);
      if (perturbed[i] == clean_texts[i]) ++unmodified;
    }
    MetricsReport m = evaluate_metrics(
        predict_rows(model, corpus, vocab, rows, embeddings, &perturbed), labels);
    report.rows.push_back({perturb_kind_name(spec.kind), spec.rate, m.accuracy,
                           m.f1_weighted, m.accuracy - clean.accuracy,
                           m.f1_weighted - clean.f1_weighted, unmodified});
  }
  return report;
}

}  // namespace ota
