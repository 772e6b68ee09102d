#include "ota/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ota/errors.hpp"

namespace ota {

int label_from_string(const std::string& s) {
  for (int i = 0; i < kNumClasses; ++i)
    if (s == kLabelNames[static_cast<size_t>(i)]) return i;
  return -1;
}

namespace {

// RFC 4180 field splitter for one logical record starting at `pos`.
// Advances pos past the record terminator. Quoted fields may contain
// embedded newlines.
std::vector<std::string> csv_record(const std::string& s, size_t& pos, int record_no) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool started = false;
  while (pos < s.size()) {
    const char c = s[pos];
    if (in_quotes) {
      if (c == '"') {
        if (pos + 1 < s.size() && s[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
        } else {
          in_quotes = false;
          ++pos;
        }
      } else {
        field.push_back(c);
        ++pos;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty())
        throw IoError("malformed quoting in record " + std::to_string(record_no));
      in_quotes = true;
      started = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\n' || c == '\r') {
      ++pos;
      if (c == '\r' && pos < s.size() && s[pos] == '\n') ++pos;
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(c);
      started = true;
      ++pos;
    }
  }
  if (in_quotes) throw IoError("unterminated quote in record " + std::to_string(record_no));
  if (started || !fields.empty()) fields.push_back(std::move(field));
  return fields;
}

}  // namespace

LabeledCorpus load_corpus_from_string(const std::string& csv, const TextTables& tables) {
  const long long bad = utf8_find_invalid(csv);
  if (bad >= 0) throw IoError("invalid UTF-8 at byte offset " + std::to_string(bad));

  size_t pos = 0;
  int record_no = 0;
  const std::vector<std::string> header = csv_record(csv, pos, record_no);
  if (header.size() != 2 || header[0] != "text" || header[1] != "label")
    throw IoError("expected header `text,label`");

  LabeledCorpus corpus;
  while (pos < csv.size()) {
    ++record_no;
    std::vector<std::string> fields = csv_record(csv, pos, record_no);
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
    if (fields.size() != 2)
      throw IoError("row " + std::to_string(record_no) + ": expected 2 fields, got " +
                    std::to_string(fields.size()));
    const int label = label_from_string(fields[1]);
    if (label < 0)
      throw IoError("row " + std::to_string(record_no) + ": unknown label \"" + fields[1] +
                    "\"");
    LabeledSample s;
    s.id = static_cast<int>(corpus.samples.size());
    s.raw_text = std::move(fields[0]);
    s.clean_text = preprocess(s.raw_text, tables);
    s.label = label;
    corpus.class_counts[static_cast<size_t>(label)] += 1;
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

LabeledCorpus load_corpus(const std::string& path, const TextTables& tables) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_corpus_from_string(buf.str(), tables);
}

Vocab build_vocab(const LabeledCorpus& corpus, int min_frequency) {
  if (min_frequency < 1) throw ValueError("build_vocab: min_frequency must be >= 1");
  std::unordered_map<std::string, long long> counts;
  for (const auto& s : corpus.samples)
    for (const auto& tok : whitespace_tokens(s.clean_text)) counts[tok] += 1;

  std::vector<std::pair<std::string, long long>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_frequency) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.min_frequency = min_frequency;
  v.tokens.reserve(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    v.index[kept[i].first] = static_cast<int>(i) + 2;
    v.tokens.push_back(kept[i].first);
  }
  return v;
}

void encode(const std::string& clean_text, const Vocab& vocab, int max_len,
            std::vector<int>& ids_out, std::vector<uint8_t>& mask_out) {
  if (max_len < 1) throw ValueError("encode: max_len must be >= 1");
  ids_out.assign(static_cast<size_t>(max_len), Vocab::kPad);
  mask_out.assign(static_cast<size_t>(max_len), 0);
  const auto tokens = whitespace_tokens(clean_text);
  const int n = std::min(static_cast<int>(tokens.size()), max_len);
  for (int i = 0; i < n; ++i) {
    ids_out[static_cast<size_t>(i)] = vocab.lookup(tokens[static_cast<size_t>(i)]);
    mask_out[static_cast<size_t>(i)] = 1;
  }
}

EncodedBatch encode_batch(const LabeledCorpus& corpus, const std::vector<int>& rows,
                          const Vocab& vocab, int max_len,
                          const std::vector<std::string>* texts) {
  EncodedBatch b;
  b.batch = static_cast<int>(rows.size());
  b.len = max_len;
  b.token_ids.reserve(rows.size() * static_cast<size_t>(max_len));
  b.mask.reserve(rows.size() * static_cast<size_t>(max_len));
  std::vector<int> ids;
  std::vector<uint8_t> mask;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& sample = corpus.samples[static_cast<size_t>(rows[i])];
    const std::string& text = texts ? (*texts)[i] : sample.clean_text;
    encode(text, vocab, max_len, ids, mask);
    if (mask[0] == 0) {
      // empty text: a lone unknown token keeps masked pooling defined
      ids[0] = Vocab::kUnk;
      mask[0] = 1;
    }
    b.token_ids.insert(b.token_ids.end(), ids.begin(), ids.end());
    b.mask.insert(b.mask.end(), mask.begin(), mask.end());
    b.labels.push_back(sample.label);
    b.sample_ids.push_back(sample.id);
  }
  return b;
}

FoldAssignment stratified_folds(const std::vector<int>& labels, int k, RngStream& rng) {
  if (k < 2) throw ValueError("stratified_folds: k must be >= 2");
  std::array<std::vector<int>, kNumClasses> by_class;
  for (size_t i = 0; i < labels.size(); ++i)
    by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));

  FoldAssignment fa;
  fa.k = k;
  fa.fold_of.assign(labels.size(), -1);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[static_cast<size_t>(c)];
    if (idx.empty()) continue;
    if (static_cast<int>(idx.size()) < k)
      throw ValueError(std::string("stratified_folds: class \"") +
                       kLabelNames[static_cast<size_t>(c)] + "\" has " +
                       std::to_string(idx.size()) + " members, fewer than k=" +
                       std::to_string(k));
    // Fisher-Yates with the seeded stream
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    for (size_t i = 0; i < idx.size(); ++i)
      fa.fold_of[static_cast<size_t>(idx[i])] = static_cast<int>(i) % k;
  }
  return fa;
}

std::pair<std::vector<int>, std::vector<int>> stratified_split(
    const std::vector<int>& indices, const std::vector<int>& labels, double fraction,
    RngStream& rng) {
  std::array<std::vector<int>, kNumClasses> by_class;
  for (int i : indices) by_class[static_cast<size_t>(labels[static_cast<size_t>(i)])].push_back(i);
  std::vector<int> selected, rest;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[static_cast<size_t>(c)];
    if (idx.empty())
      throw ValueError(std::string("stratified_split: class \"") +
                       kLabelNames[static_cast<size_t>(c)] + "\" absent from split input");
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    size_t take = static_cast<size_t>(fraction * static_cast<double>(idx.size()));
    take = std::max<size_t>(take, 1);
    if (take >= idx.size())
      throw ValueError(std::string("stratified_split: class \"") +
                       kLabelNames[static_cast<size_t>(c)] +
                       "\" too small to split (size " + std::to_string(idx.size()) + ")");
    for (size_t i = 0; i < idx.size(); ++i)
      (i < take ? selected : rest).push_back(idx[i]);
  }
  std::sort(selected.begin(), selected.end());
  std::sort(rest.begin(), rest.end());
  return {selected, rest};
}

}  // namespace ota
