#pragma once

#include <map>
#include <string>
#include <vector>

#include "ota/data.hpp"
#include "ota/train.hpp"

namespace ota {

enum class PerturbKind {
  CharDelete,
  CharSubstitute,
  CharInsert,
  WordDelete,
  Abbreviation,
  Slang,
};

const char* perturb_kind_name(PerturbKind k);

struct PerturbSpec {
  PerturbKind kind;
  double rate;
};

enum class CharMode { Delete, Substitute, Insert };

// Exactly floor(rate * non-space char count) positions chosen uniformly
// without replacement; whitespace positions are never selected. Substitution
// always picks a lowercase letter different from the original.
std::string perturb_chars(const std::string& text, CharMode mode, double rate,
                          RngStream& rng);

// Removes exactly floor(rate * token count) whitespace tokens.
std::string perturb_words(const std::string& text, double rate, RngStream& rng);

struct SubstitutionTable {
  std::map<std::string, std::string> entries;  // whole-token, case-insensitive match
  std::string kind;                            // "abbreviation" | "slang"
};

const SubstitutionTable& default_abbreviation_table();
const SubstitutionTable& default_slang_table();
SubstitutionTable load_substitution_table(const std::string& path, const std::string& kind);

// Replaces floor(rate * eligible token count) of the tokens matching a table
// source, chosen uniformly.
std::string lexical_substitute(const std::string& text, const SubstitutionTable& table,
                               double rate, RngStream& rng);

std::string apply_perturbation(const std::string& text, const PerturbSpec& spec,
                               RngStream& rng, const SubstitutionTable& abbrev,
                               const SubstitutionTable& slang);

// Six perturbation types at the standard intensity grid, in report order.
std::vector<PerturbSpec> standard_protocol();

struct RobustnessRow {
  std::string kind;  // "clean" for the baseline row
  double rate = 0.0;
  double accuracy = 0.0;
  double f1_weighted = 0.0;
  double delta_accuracy = 0.0;
  double delta_f1 = 0.0;
  long long unmodified = 0;  // samples whose perturbed text equals the clean text
};

struct RobustnessReport {
  long long sample_size = 0;
  std::vector<RobustnessRow> rows;  // clean row first
};

RobustnessReport robustness_suite(Model& model, const LabeledCorpus& corpus,
                                  const Vocab& vocab,
                                  const std::vector<PerturbSpec>& protocol,
                                  long long sample_size, uint64_t seed,
                                  const SubstitutionTable& abbrev,
                                  const SubstitutionTable& slang,
                                  const EmbeddingFile* embeddings = nullptr);

}  // namespace ota
