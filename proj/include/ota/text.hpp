#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ota {

// ---- UTF-8 helpers ----

// Decodes to codepoints; throws IoError with the byte offset of the first
// invalid sequence.
std::vector<uint32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<uint32_t>& cps);
// Validates without materializing codepoints; returns byte offset of the
// first invalid sequence, or -1 if valid.
long long utf8_find_invalid(const std::string& s);

// ---- mapping tables ----

// `source<TAB>replacement` per line, `#` comments, blank lines ignored.
std::map<std::string, std::string> load_mapping_file(const std::string& path);

// Bundled defaults (editable copies live under data/).
const std::map<std::string, std::string>& default_emoji_table();
const std::map<std::string, std::string>& default_contraction_table();

struct TextTables {
  std::map<std::string, std::string> emoji = default_emoji_table();
  std::map<std::string, std::string> contractions = default_contraction_table();
};

// ---- preprocessing ----

// Fixed-order pipeline: mention removal, HTML tag stripping, emoji-to-alias
// mapping, contraction expansion, lowercasing, whitespace collapse, Unicode
// composition. Emoticons, punctuation, and URLs are preserved. Idempotent.
std::string preprocess(const std::string& raw, const TextTables& tables);
std::string preprocess(const std::string& raw);

std::vector<std::string> whitespace_tokens(const std::string& s);

}  // namespace ota
