#include "ota/analysis.hpp"

#include <cmath>

#include "ota/errors.hpp"
#include "ota/text.hpp"

namespace ota {

namespace {

const char* kNouns[] = {
    "account",  "age",      "anger",    "animal",   "answer",   "area",     "argument",
    "art",      "attack",   "baby",     "bank",     "behavior", "belief",   "bible",
    "bird",     "blood",    "body",     "book",     "boy",      "brother",  "business",
    "car",      "cat",      "change",   "child",    "children", "church",   "city",
    "class",    "color",    "community","country",  "crime",    "culture",  "customs",
    "daughter", "day",      "death",    "dog",      "door",     "dream",    "education",
    "end",      "enemy",    "ethnicity","eye",      "face",     "fact",     "faith",
    "family",   "father",   "fear",     "fire",     "food",     "friend",   "game",
    "gender",   "generation","girl",    "god",      "government","group",   "hair",
    "hand",     "hate",     "hatred",   "head",     "heart",    "history",  "home",
    "house",    "human",    "idea",     "identity", "information","internet","island",
    "job",      "kid",      "kind",     "language", "law",      "level",    "life",
    "light",    "line",     "love",     "man",      "marriage", "media",    "member",
    "men",      "mind",     "minute",   "moment",   "money",    "month",    "morning",
    "mosque",   "mother",   "mouth",    "music",    "name",     "nation",   "night",
    "number",   "office",   "opinion",  "parent",   "part",     "party",    "people",
    "person",   "phone",    "place",    "point",    "police",   "power",    "president",
    "problem",  "question", "race",     "racism",   "reason",   "religion", "result",
    "right",    "road",     "room",     "school",   "sense",    "sex",      "side",
    "sister",   "skin",     "society",  "son",      "speech",   "state",    "story",
    "street",   "student",  "system",   "teacher",  "temple",   "thing",    "time",
    "town",     "tradition","tweet",    "video",    "violence", "voice",    "war",
    "water",    "way",      "week",     "wife",     "woman",    "women",    "word",
    "work",     "world",    "year",     "youth",
};

const char* kVerbs[] = {
    "act",      "agree",    "answer",   "appear",   "ask",      "attack",   "become",
    "begin",    "believe",  "belong",   "break",    "bring",    "build",    "call",
    "care",     "carry",    "change",   "choose",   "come",     "consider", "continue",
    "create",   "cut",      "decide",   "deserve",  "die",      "disagree", "do",
    "drink",    "drive",    "eat",      "exist",    "expect",   "explain",  "fall",
    "feel",     "fight",    "find",     "follow",   "forget",   "get",      "give",
    "go",       "grow",     "happen",   "hate",     "have",     "hear",     "help",
    "hit",      "hold",     "hope",     "hurt",     "imagine",  "include",  "keep",
    "kill",     "know",     "laugh",    "learn",    "leave",    "let",      "listen",
    "live",     "look",     "lose",     "make",     "marry",    "mean",     "meet",
    "move",     "need",     "offend",   "open",     "pay",      "play",     "pray",
    "prove",    "put",      "read",     "realize",  "remember", "respect",  "run",
    "say",      "see",      "seem",     "send",     "show",     "speak",    "stand",
    "start",    "stay",     "stop",     "support",  "take",     "talk",     "teach",
    "tell",     "think",    "threaten", "try",      "turn",     "understand","use",
    "wait",     "walk",     "want",     "watch",    "wear",     "win",      "wish",
    "write",
};

}  // namespace

const PosLexicon& default_pos_lexicon() {
  static const PosLexicon lexicon = [] {
    PosLexicon lex;
    // nouns take precedence for words listed in both sets
    for (const char* w : kVerbs) lex[w] = "verb";
    for (const char* w : kNouns) lex[w] = "noun";
    return lex;
  }();
  return lexicon;
}

PosLexicon load_pos_lexicon(const std::string& path) {
  PosLexicon lex;
  for (auto& [word, tag] : load_mapping_file(path)) {
    if (tag != "noun" && tag != "verb")
      throw IoError("pos lexicon: tag for \"" + word + "\" must be noun or verb");
    lex[word] = tag;
  }
  return lex;
}

namespace {

bool is_url_token(const std::string& tok) {
  return tok.rfind("http://", 0) == 0 || tok.rfind("https://", 0) == 0 ||
         tok.rfind("www.", 0) == 0;
}

}  // namespace

LinguisticFeatures extract_features(const std::string& text, const PosLexicon& lexicon) {
  LinguisticFeatures f;
  f.char_count = static_cast<long long>(utf8_decode(text).size());
  for (const auto& tok : whitespace_tokens(text)) {
    ++f.token_count;
    if (is_url_token(tok)) ++f.url_count;
    auto it = lexicon.find(tok);
    if (it != lexicon.end()) {
      if (it->second == "noun")
        ++f.noun_count;
      else
        ++f.verb_count;
    }
  }
  return f;
}

std::array<ClassFeatureMeans, kNumClasses> class_feature_summary(const LabeledCorpus& corpus,
                                                                 const PosLexicon& lexicon) {
  std::array<ClassFeatureMeans, kNumClasses> out{};
  for (const auto& s : corpus.samples) {
    const LinguisticFeatures f = extract_features(s.clean_text, lexicon);
    ClassFeatureMeans& m = out[static_cast<size_t>(s.label)];
    m.url += static_cast<double>(f.url_count);
    m.chars += static_cast<double>(f.char_count);
    m.tokens += static_cast<double>(f.token_count);
    m.nouns += static_cast<double>(f.noun_count);
    m.verbs += static_cast<double>(f.verb_count);
    m.count += 1;
  }
  for (int c = 0; c < kNumClasses; ++c) {
    ClassFeatureMeans& m = out[static_cast<size_t>(c)];
    if (m.count == 0)
      throw ValueError(std::string("class_feature_summary: class \"") +
                       kLabelNames[static_cast<size_t>(c)] + "\" is empty");
    m.url /= static_cast<double>(m.count);
    m.chars /= static_cast<double>(m.count);
    m.tokens /= static_cast<double>(m.count);
    m.nouns /= static_cast<double>(m.count);
    m.verbs /= static_cast<double>(m.count);
  }
  return out;
}

UnigramModel unigram_model(const std::vector<std::string>& texts) {
  std::map<std::string, long long> counts;
  long long total = 0;
  for (const auto& t : texts)
    for (const auto& tok : whitespace_tokens(t)) {
      counts[tok] += 1;
      ++total;
    }
  if (total == 0) throw ValueError("unigram_model: empty token stream");
  UnigramModel m;
  for (const auto& [tok, n] : counts)
    m.probs[tok] = static_cast<double>(n) / static_cast<double>(total);
  return m;
}

double js_divergence(const UnigramModel& p, const UnigramModel& q) {
  if (p.probs.empty() || q.probs.empty())
    throw ValueError("js_divergence: empty support");
  // KL terms over the union support; entries with zero numerator contribute 0
  auto half_kl = [](const UnigramModel& a, const UnigramModel& b) {
    double kl = 0.0;
    for (const auto& [tok, pa] : a.probs) {
      auto it = b.probs.find(tok);
      const double pb = it == b.probs.end() ? 0.0 : it->second;
      const double m = 0.5 * (pa + pb);
      kl += pa * std::log2(pa / m);
    }
    return kl;
  };
  const double jsd = 0.5 * half_kl(p, q) + 0.5 * half_kl(q, p);
  // clamp float noise at the boundaries
  return std::min(1.0, std::max(0.0, jsd));
}

double DivergenceMatrix::off_diagonal_mean() const {
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < kNumClasses; ++i)
    for (int j = 0; j < kNumClasses; ++j)
      if (i != j) {
        sum += values[static_cast<size_t>(i)][static_cast<size_t>(j)];
        ++n;
      }
  return sum / n;
}

DivergenceMatrix pairwise_divergence(const LabeledCorpus& corpus) {
  std::array<std::vector<std::string>, kNumClasses> texts;
  for (const auto& s : corpus.samples)
    texts[static_cast<size_t>(s.label)].push_back(s.clean_text);
  std::array<UnigramModel, kNumClasses> models;
  for (int c = 0; c < kNumClasses; ++c) {
    if (texts[static_cast<size_t>(c)].empty())
      throw ValueError(std::string("pairwise_divergence: class \"") +
                       kLabelNames[static_cast<size_t>(c)] + "\" missing");
    models[static_cast<size_t>(c)] = unigram_model(texts[static_cast<size_t>(c)]);
  }
  DivergenceMatrix m;
  for (int i = 0; i < kNumClasses; ++i)
    for (int j = i + 1; j < kNumClasses; ++j) {
      const double d = js_divergence(models[static_cast<size_t>(i)],
                                     models[static_cast<size_t>(j)]);
      m.values[static_cast<size_t>(i)][static_cast<size_t>(j)] = d;
      m.values[static_cast<size_t>(j)][static_cast<size_t>(i)] = d;
    }
  return m;
}

}  // namespace ota
