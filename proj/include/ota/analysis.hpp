#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "ota/data.hpp"

namespace ota {

struct LinguisticFeatures {
  long long url_count = 0;
  long long char_count = 0;
  long long token_count = 0;
  long long noun_count = 0;  // lexicon lookup, approximate
  long long verb_count = 0;  // lexicon lookup, approximate
};

// word -> "noun" | "verb"
using PosLexicon = std::map<std::string, std::string>;
const PosLexicon& default_pos_lexicon();
PosLexicon load_pos_lexicon(const std::string& path);

LinguisticFeatures extract_features(const std::string& text,
                                    const PosLexicon& lexicon = default_pos_lexicon());

struct ClassFeatureMeans {
  double url = 0.0, chars = 0.0, tokens = 0.0, nouns = 0.0, verbs = 0.0;
  long long count = 0;
};

// means per class, ordered as kLabelNames; throws on an empty class
std::array<ClassFeatureMeans, kNumClasses> class_feature_summary(
    const LabeledCorpus& corpus, const PosLexicon& lexicon = default_pos_lexicon());

struct UnigramModel {
  std::map<std::string, double> probs;  // sum to 1 over support
};

UnigramModel unigram_model(const std::vector<std::string>& texts);

// Jensen-Shannon divergence, log base 2, in [0,1]
double js_divergence(const UnigramModel& p, const UnigramModel& q);

struct DivergenceMatrix {
  std::array<std::array<double, kNumClasses>, kNumClasses> values{};
  double off_diagonal_mean() const;
};

DivergenceMatrix pairwise_divergence(const LabeledCorpus& corpus);

}  // namespace ota
