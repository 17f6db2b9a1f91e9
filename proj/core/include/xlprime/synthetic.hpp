#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xlprime/corpus.hpp"

namespace xlp {

struct StimulusItem;

/// Word inventory of one synthetic language.
struct Lexicon {
  std::vector<std::string> verbs;
  std::vector<std::string> nouns;
  std::string preposition;
};

/// Dative-like grammar shared (or not) by two synthetic languages.
///
/// Each sentence realizes a verb, a theme and a recipient either as PO ("V theme p recipient")
/// or DO ("V recipient theme"). Within a document the structure of sentence k+1 copies that of
/// sentence k with probability `persistence`, otherwise it is redrawn with `po_rate`; the
/// stationary PO share therefore stays at `po_rate`.
struct GrammarConfig {
  std::size_t verbs = 12;
  std::size_t nouns = 40;
  double po_rate = 0.5;
  double persistence = 0.9;
  std::size_t min_sentences = 4;
  std::size_t max_sentences = 12;
  /// When false, the second language uses verb-final orders ("theme p recipient V" /
  /// "recipient theme V") so the two grammars share no order template.
  bool shared_structure = true;
  /// Explicit lexica; generated from per-language syllable inventories when empty.
  Lexicon l1_lexicon;
  Lexicon l2_lexicon;
};

enum class Structure { po, do_ };

struct SyntheticPair {
  CorpusShard l1;
  CorpusShard l2;
  Lexicon l1_lexicon;
  Lexicon l2_lexicon;
  /// Structure of every generated sentence, per language, in document order.
  std::vector<Structure> l1_structures;
  std::vector<Structure> l2_structures;
};

/// Lexica built from disjoint syllable inventories; deterministic in `seed`.
std::pair<Lexicon, Lexicon> make_lexica(const GrammarConfig& config, std::uint64_t seed);

/// Sentence text without final punctuation, e.g. "V theme p recipient".
std::string realize(const Lexicon& lexicon, std::size_t verb, std::size_t theme,
                    std::size_t recipient, Structure structure, bool verb_final = false);

/// Generates `n_docs` documents per language. Sentences inside a document are joined as
/// "s1. s2. ... sk." Throws ConfigError when the lexica share a word type.
SyntheticPair generate_synthetic_pair(const GrammarConfig& config, std::size_t n_docs,
                                      std::uint64_t seed);

/// Crosslingual stimuli: L1 PO/DO primes and L2 PO/DO targets with fresh content per item.
std::vector<StimulusItem> make_synthetic_stimuli(const SyntheticPair& pair, const GrammarConfig& config,
                                                 std::size_t n_items, std::uint64_t seed);

}  // namespace xlp
