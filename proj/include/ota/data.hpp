#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "ota/rng.hpp"
#include "ota/text.hpp"

namespace ota {

inline constexpr int kNumClasses = 5;
inline constexpr std::array<const char*, kNumClasses> kLabelNames = {
    "age", "ethnicity", "gender", "religion", "other_hate"};

// index in kLabelNames, or -1
int label_from_string(const std::string& s);

struct LabeledSample {
  int id = 0;
  std::string raw_text;
  std::string clean_text;
  int label = 0;
};

struct LabeledCorpus {
  std::vector<LabeledSample> samples;
  std::array<long long, kNumClasses> class_counts{};
  size_t size() const { return samples.size(); }
};

// Reserved ids: 0 = padding, 1 = unknown. Real tokens indexed from 2 in
// descending corpus frequency, ties broken lexicographically.
struct Vocab {
  std::unordered_map<std::string, int> index;
  std::vector<std::string> tokens;  // tokens[i-2] is the token at index i
  int min_frequency = 1;

  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  int size() const { return static_cast<int>(tokens.size()) + 2; }
  int lookup(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? kUnk : it->second;
  }
};

struct EncodedBatch {
  int batch = 0;
  int len = 0;
  std::vector<int> token_ids;   // batch*len
  std::vector<uint8_t> mask;    // batch*len, 1 on real tokens
  std::vector<int> labels;      // batch
  std::vector<int> sample_ids;  // batch (for precomputed-embedding lookup)
};

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;  // per sample, in [0,k)
};

// CSV with header `text,label`, RFC 4180 quoting. Rows are preprocessed on
// load; id = row ordinal (0-based).
LabeledCorpus load_corpus(const std::string& path, const TextTables& tables = TextTables());
LabeledCorpus load_corpus_from_string(const std::string& csv,
                                      const TextTables& tables = TextTables());

Vocab build_vocab(const LabeledCorpus& corpus, int min_frequency);

void encode(const std::string& clean_text, const Vocab& vocab, int max_len,
            std::vector<int>& ids_out, std::vector<uint8_t>& mask_out);

// Builds one batch from the given corpus rows. Texts may be overridden (for
// perturbation evaluation) via `texts`; empty-after-encoding rows keep one
// unknown token so pooling stays defined.
EncodedBatch encode_batch(const LabeledCorpus& corpus, const std::vector<int>& rows,
                          const Vocab& vocab, int max_len,
                          const std::vector<std::string>* texts = nullptr);

// Within each class, shuffled indices are dealt round-robin to folds.
FoldAssignment stratified_folds(const std::vector<int>& labels, int k, RngStream& rng);

// Stratified subset of roughly `fraction` of `indices` (at least one per
// class present); returns (selected, remainder).
std::pair<std::vector<int>, std::vector<int>> stratified_split(
    const std::vector<int>& indices, const std::vector<int>& labels, double fraction,
    RngStream& rng);

}  // namespace ota
