#include "ota/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ota/errors.hpp"

namespace ota {

namespace {

bool is_cont(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

long long utf8_find_invalid(const std::string& s) {
  size_t i = 0;
  const size_t n = s.size();
  while (i < n) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    size_t len;
    uint32_t cp;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return static_cast<long long>(i);
    }
    if (i + len > n) return static_cast<long long>(i);
    for (size_t k = 1; k < len; ++k) {
      if (!is_cont(static_cast<unsigned char>(s[i + k]))) return static_cast<long long>(i);
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    }
    // reject overlong forms, surrogates, and out-of-range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
      return static_cast<long long>(i);
    i += len;
  }
  return -1;
}

std::vector<uint32_t> utf8_decode(const std::string& s) {
  const long long bad = utf8_find_invalid(s);
  if (bad >= 0)
    throw IoError("invalid UTF-8 at byte offset " + std::to_string(bad));
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      out.push_back(c);
      i += 1;
    } else if ((c & 0xE0) == 0xC0) {
      out.push_back(((c & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu));
      i += 2;
    } else if ((c & 0xF0) == 0xE0) {
      out.push_back(((c & 0x0Fu) << 12) |
                    ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
                    (static_cast<unsigned char>(s[i + 2]) & 0x3Fu));
      i += 3;
    } else {
      out.push_back(((c & 0x07u) << 18) |
                    ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
                    ((static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) |
                    (static_cast<unsigned char>(s[i + 3]) & 0x3Fu));
      i += 4;
    }
  }
  return out;
}

std::string utf8_encode(const std::vector<uint32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (uint32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::map<std::string, std::string> load_mapping_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mapping file: " + path);
  std::map<std::string, std::string> table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected source<TAB>replacement");
    table[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return table;
}

const std::map<std::string, std::string>& default_emoji_table() {
  static const std::map<std::string, std::string> table = {
      {"\U0001F600", "grinning_face"},
      {"\U0001F602", "face_with_tears_of_joy"},
      {"\U0001F923", "rolling_on_the_floor_laughing"},
      {"\U0001F60D", "heart_eyes"},
      {"\U0001F62D", "loudly_crying_face"},
      {"\U0001F621", "angry_face"},
      {"\U0001F620", "annoyed_face"},
      {"\U0001F644", "eye_roll"},
      {"\U0001F612", "unamused_face"},
      {"\U0001F480", "skull"},
      {"\U0001F525", "fire"},
      {"\U0001F4AF", "hundred_points"},
      {"\U0001F44D", "thumbs_up"},
      {"\U0001F44E", "thumbs_down"},
      {"\U0001F64F", "folded_hands"},
      {"\U0001F914", "thinking_face"},
      {"\U0001F910", "zipper_mouth"},
      {"\U0001F92C", "cursing_face"},
      {"❤", "red_heart"},
      {"❤️", "red_heart"},
      {"\U0001F494", "broken_heart"},
      {"\U0001F937", "shrug"},
  };
  return table;
}

const std::map<std::string, std::string>& default_contraction_table() {
  static const std::map<std::string, std::string> table = {
      {"ain't", "is not"},       {"aren't", "are not"},
      {"can't", "cannot"},       {"couldn't", "could not"},
      {"didn't", "did not"},     {"doesn't", "does not"},
      {"don't", "do not"},       {"hadn't", "had not"},
      {"hasn't", "has not"},     {"haven't", "have not"},
      {"he'd", "he would"},      {"he'll", "he will"},
      {"he's", "he is"},         {"i'd", "i would"},
      {"i'll", "i will"},        {"i'm", "i am"},
      {"i've", "i have"},        {"isn't", "is not"},
      {"it'd", "it would"},      {"it'll", "it will"},
      {"it's", "it is"},         {"let's", "let us"},
      {"mightn't", "might not"}, {"mustn't", "must not"},
      {"shan't", "shall not"},   {"she'd", "she would"},
      {"she'll", "she will"},    {"she's", "she is"},
      {"shouldn't", "should not"},
      {"that's", "that is"},     {"there's", "there is"},
      {"they'd", "they would"},  {"they'll", "they will"},
      {"they're", "they are"},   {"they've", "they have"},
      {"wasn't", "was not"},     {"we'd", "we would"},
      {"we'll", "we will"},      {"we're", "we are"},
      {"we've", "we have"},      {"weren't", "were not"},
      {"what's", "what is"},     {"where's", "where is"},
      {"who's", "who is"},       {"won't", "will not"},
      {"wouldn't", "would not"}, {"you'd", "you would"},
      {"you'll", "you will"},    {"you're", "you are"},
      {"you've", "you have"},
  };
  return table;
}

namespace {

bool is_ws(uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
}

bool is_word_char(uint32_t cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9') ||
         cp == '_';
}

// step 1: drop @mentions (an '@' at start or after whitespace followed by
// word characters)
std::vector<uint32_t> remove_mentions(const std::vector<uint32_t>& in) {
  std::vector<uint32_t> out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    const bool at_boundary = out.empty() || is_ws(out.back());
    if (in[i] == '@' && at_boundary && i + 1 < in.size() && is_word_char(in[i + 1])) {
      i += 1;
      while (i < in.size() && is_word_char(in[i])) ++i;
      continue;
    }
    out.push_back(in[i]);
    ++i;
  }
  return out;
}

// step 2: strip complete <...> tag pairs
std::vector<uint32_t> strip_html(const std::vector<uint32_t>& in) {
  std::vector<uint32_t> out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    const bool tag_start =
        in[i] == '<' && i + 1 < in.size() &&
        (in[i + 1] == '/' || (in[i + 1] >= 'a' && in[i + 1] <= 'z') ||
         (in[i + 1] >= 'A' && in[i + 1] <= 'Z'));
    if (tag_start) {
      size_t j = i + 1;
      while (j < in.size() && in[j] != '>' && in[j] != '<') ++j;
      if (j < in.size() && in[j] == '>') {
        i = j + 1;
        continue;
      }
    }
    out.push_back(in[i]);
    ++i;
  }
  return out;
}

// step 3: emoji -> " alias " (longest match first over decoded keys)
std::vector<uint32_t> map_emoji(const std::vector<uint32_t>& in,
                                const std::map<std::string, std::string>& table) {
  struct Entry {
    std::vector<uint32_t> key;
    std::vector<uint32_t> alias;
  };
  std::vector<Entry> entries;
  for (const auto& [k, v] : table) entries.push_back({utf8_decode(k), utf8_decode(v)});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.key.size() > b.key.size(); });
  std::vector<uint32_t> out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    bool matched = false;
    for (const Entry& e : entries) {
      if (i + e.key.size() <= in.size() &&
          std::equal(e.key.begin(), e.key.end(), in.begin() + static_cast<long>(i))) {
        out.push_back(' ');
        out.insert(out.end(), e.alias.begin(), e.alias.end());
        out.push_back(' ');
        i += e.key.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back(in[i]);
      ++i;
    }
  }
  return out;
}

uint32_t ascii_lower(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;  // Latin-1 uppercase
  return cp;
}

// step 4: token-wise contraction expansion (case-insensitive match; the
// replacement is already lowercase and lowercasing follows anyway)
std::vector<uint32_t> expand_contractions(const std::vector<uint32_t>& in,
                                          const std::map<std::string, std::string>& table) {
  std::vector<uint32_t> out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    if (is_ws(in[i])) {
      out.push_back(in[i]);
      ++i;
      continue;
    }
    size_t j = i;
    while (j < in.size() && !is_ws(in[j])) ++j;
    std::vector<uint32_t> tok(in.begin() + static_cast<long>(i), in.begin() + static_cast<long>(j));
    std::vector<uint32_t> lowered(tok);
    for (auto& c : lowered) c = ascii_lower(c);
    // tolerate the common curly apostrophe
    for (auto& c : lowered)
      if (c == 0x2019) c = '\'';
    const std::string key = utf8_encode(lowered);
    auto it = table.find(key);
    if (it != table.end()) {
      const auto rep = utf8_decode(it->second);
      out.insert(out.end(), rep.begin(), rep.end());
    } else {
      out.insert(out.end(), tok.begin(), tok.end());
    }
    i = j;
  }
  return out;
}

// step 7: compose common Latin base + combining mark pairs (NFC subset; marks
// outside the table pass through unchanged)
uint32_t compose_pair(uint32_t base, uint32_t mark) {
  struct Row {
    uint32_t base, mark, composed;
  };
  static const Row rows[] = {
      {'a', 0x0300, 0xE0}, {'e', 0x0300, 0xE8}, {'i', 0x0300, 0xEC},
      {'o', 0x0300, 0xF2}, {'u', 0x0300, 0xF9},
      {'a', 0x0301, 0xE1}, {'e', 0x0301, 0xE9}, {'i', 0x0301, 0xED},
      {'o', 0x0301, 0xF3}, {'u', 0x0301, 0xFA}, {'y', 0x0301, 0xFD},
      {'a', 0x0302, 0xE2}, {'e', 0x0302, 0xEA}, {'i', 0x0302, 0xEE},
      {'o', 0x0302, 0xF4}, {'u', 0x0302, 0xFB},
      {'a', 0x0303, 0xE3}, {'o', 0x0303, 0xF5}, {'n', 0x0303, 0xF1},
      {'a', 0x0308, 0xE4}, {'e', 0x0308, 0xEB}, {'i', 0x0308, 0xEF},
      {'o', 0x0308, 0xF6}, {'u', 0x0308, 0xFC}, {'y', 0x0308, 0xFF},
      {'c', 0x0327, 0xE7},
  };
  for (const Row& r : rows)
    if (r.base == base && r.mark == mark) return r.composed;
  return 0;
}

std::vector<uint32_t> compose_nfc_subset(const std::vector<uint32_t>& in) {
  std::vector<uint32_t> out;
  out.reserve(in.size());
  for (uint32_t cp : in) {
    if (!out.empty() && cp >= 0x0300 && cp <= 0x036F) {
      const uint32_t composed = compose_pair(out.back(), cp);
      if (composed) {
        out.back() = composed;
        continue;
      }
    }
    out.push_back(cp);
  }
  return out;
}

}  // namespace

std::string preprocess(const std::string& raw, const TextTables& tables) {
  std::vector<uint32_t> cps = utf8_decode(raw);
  cps = remove_mentions(cps);
  cps = strip_html(cps);
  cps = map_emoji(cps, tables.emoji);
  cps = expand_contractions(cps, tables.contractions);
  for (auto& c : cps) c = ascii_lower(c);
  // collapse whitespace runs to single spaces, trim ends
  {
    std::vector<uint32_t> out;
    out.reserve(cps.size());
    for (uint32_t c : cps) {
      if (is_ws(c)) {
        if (!out.empty() && out.back() != ' ') out.push_back(' ');
      } else {
        out.push_back(c);
      }
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    cps = std::move(out);
  }
  cps = compose_nfc_subset(cps);
  return utf8_encode(cps);
}

std::string preprocess(const std::string& raw) {
  static const TextTables defaults;
  return preprocess(raw, defaults);
}

std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

}  // namespace ota
