#include "xlprime/synthetic.hpp"

#include <set>

#include "xlprime/error.hpp"
#include "xlprime/rng.hpp"
#include "xlprime/stimuli.hpp"

namespace xlp {

namespace {

struct Phonology {
  std::vector<std::string> onsets;
  std::vector<std::string> nuclei;
  std::vector<std::string> codas;
};

// Loosely Dutch-like and English-like inventories; the orthographies overlap on purpose,
// disjointness is enforced at the word level.
const Phonology& phonology(Language lang) {
  static const Phonology l1{{"b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "sch", "st"},
                            {"aa", "ee", "oo", "ui", "ij", "e", "o", "ie", "eu"},
                            {"", "", "n", "k", "t", "r", "l"}};
  static const Phonology l2{{"b", "ch", "d", "f", "g", "h", "j", "l", "m", "n", "p", "r", "s", "sh", "t", "th"},
                            {"a", "e", "i", "o", "u", "ea", "ay", "ow"},
                            {"", "", "ck", "n", "ng", "st", "sh"}};
  return lang == Language::l1 ? l1 : l2;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.uniform_below(items.size())];
}

std::string make_word(Rng& rng, const Phonology& ph, std::size_t syllables) {
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += pick(rng, ph.onsets);
    w += pick(rng, ph.nuclei);
    if (s + 1 == syllables) w += pick(rng, ph.codas);
  }
  return w;
}

void fill(Rng& rng, Language lang, std::size_t n, std::size_t syllables, std::set<std::string>& taken,
          std::vector<std::string>& out) {
  std::size_t attempts = 0;
  while (out.size() < n) {
    if (++attempts > 100000) throw ConfigError("synthetic: cannot draw enough distinct words");
    auto w = make_word(rng, phonology(lang), syllables);
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
}

std::set<std::string> word_types(const Lexicon& lex) {
  std::set<std::string> out(lex.verbs.begin(), lex.verbs.end());
  out.insert(lex.nouns.begin(), lex.nouns.end());
  out.insert(lex.preposition);
  return out;
}

void check_lexicon(const Lexicon& lex, const char* name) {
  if (lex.verbs.empty() || lex.nouns.size() < 2 || lex.preposition.empty()) {
    throw ConfigError(std::string("synthetic: ") + name + " lexicon needs verbs, two or more nouns and a preposition");
  }
}

Structure draw_structure(Rng& rng, const GrammarConfig& config, const Structure* previous) {
  if (previous != nullptr && rng.bernoulli(config.persistence)) return *previous;
  return rng.bernoulli(config.po_rate) ? Structure::po : Structure::do_;
}

CorpusShard generate_shard(Rng& rng, const GrammarConfig& config, const Lexicon& lex, Language lang,
                           std::size_t n_docs, bool verb_final, std::vector<Structure>& structures) {
  CorpusShard shard;
  shard.language = lang;
  shard.documents.reserve(n_docs);
  const std::size_t span = config.max_sentences - config.min_sentences + 1;
  for (std::size_t d = 0; d < n_docs; ++d) {
    const std::size_t n = config.min_sentences + rng.uniform_below(span);
    std::string doc;
    Structure prev{};
    for (std::size_t k = 0; k < n; ++k) {
      const Structure s = draw_structure(rng, config, k == 0 ? nullptr : &prev);
      const auto verb = rng.uniform_below(lex.verbs.size());
      const auto theme = rng.uniform_below(lex.nouns.size());
      auto recipient = rng.uniform_below(lex.nouns.size() - 1);
      if (recipient >= theme) ++recipient;
      if (k > 0) doc += ' ';
      doc += realize(lex, verb, theme, recipient, s, verb_final);
      doc += '.';
      structures.push_back(s);
      prev = s;
    }
    shard.documents.push_back(std::move(doc));
  }
  return shard;
}

}  // namespace

std::pair<Lexicon, Lexicon> make_lexica(const GrammarConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "lexicon"));
  std::set<std::string> taken{"aan", "to"};
  Lexicon l1, l2;
  l1.preposition = "aan";
  l2.preposition = "to";
  fill(rng, Language::l1, config.verbs, 2, taken, l1.verbs);
  fill(rng, Language::l1, config.nouns, 2, taken, l1.nouns);
  fill(rng, Language::l2, config.verbs, 2, taken, l2.verbs);
  fill(rng, Language::l2, config.nouns, 2, taken, l2.nouns);
  return {std::move(l1), std::move(l2)};
}

std::string realize(const Lexicon& lexicon, std::size_t verb, std::size_t theme, std::size_t recipient,
                    Structure structure, bool verb_final) {
  const auto& v = lexicon.verbs.at(verb);
  const auto& t = lexicon.nouns.at(theme);
  const auto& r = lexicon.nouns.at(recipient);
  const auto& p = lexicon.preposition;
  if (structure == Structure::po) {
    return verb_final ? t + " " + p + " " + r + " " + v : v + " " + t + " " + p + " " + r;
  }
  return verb_final ? r + " " + t + " " + v : v + " " + r + " " + t;
}

SyntheticPair generate_synthetic_pair(const GrammarConfig& config, std::size_t n_docs, std::uint64_t seed) {
  if (!(config.po_rate >= 0.0 && config.po_rate <= 1.0) ||
      !(config.persistence >= 0.0 && config.persistence <= 1.0)) {
    throw ConfigError("synthetic: po_rate and persistence must lie in [0, 1]");
  }
  if (config.min_sentences == 0 || config.max_sentences < config.min_sentences) {
    throw ConfigError("synthetic: need 1 <= min_sentences <= max_sentences");
  }
  if (n_docs == 0) throw ConfigError("synthetic: n_docs must be positive");

  SyntheticPair pair;
  if (config.l1_lexicon.verbs.empty() && config.l2_lexicon.verbs.empty()) {
    std::tie(pair.l1_lexicon, pair.l2_lexicon) = make_lexica(config, seed);
  } else {
    pair.l1_lexicon = config.l1_lexicon;
    pair.l2_lexicon = config.l2_lexicon;
  }
  check_lexicon(pair.l1_lexicon, "L1");
  check_lexicon(pair.l2_lexicon, "L2");
  const auto a = word_types(pair.l1_lexicon);
  for (const auto& w : word_types(pair.l2_lexicon)) {
    if (a.count(w) != 0) throw ConfigError("synthetic: word type '" + w + "' appears in both lexica");
  }

  Rng rng(derive_seed(seed, "documents"));
  pair.l1 = generate_shard(rng, config, pair.l1_lexicon, Language::l1, n_docs, false, pair.l1_structures);
  pair.l2 = generate_shard(rng, config, pair.l2_lexicon, Language::l2, n_docs, !config.shared_structure,
                           pair.l2_structures);
  return pair;
}

std::vector<StimulusItem> make_synthetic_stimuli(const SyntheticPair& pair, const GrammarConfig& config,
                                                 std::size_t n_items, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "stimuli"));
  std::vector<StimulusItem> items;
  items.reserve(n_items);
  auto draw = [&rng](const Lexicon& lex) {
    const auto verb = rng.uniform_below(lex.verbs.size());
    const auto theme = rng.uniform_below(lex.nouns.size());
    auto recipient = rng.uniform_below(lex.nouns.size() - 1);
    if (recipient >= theme) ++recipient;
    return std::tuple{verb, theme, recipient};
  };
  for (std::size_t i = 0; i < n_items; ++i) {
    StimulusItem item;
    item.item_id = static_cast<std::int64_t>(i + 1);
    item.prime_language = Language::l1;
    item.target_language = Language::l2;
    const auto [pv, pt, pr] = draw(pair.l1_lexicon);
    const auto [tv, tt, tr] = draw(pair.l2_lexicon);
    item.prime_po = realize(pair.l1_lexicon, pv, pt, pr, Structure::po);
    item.prime_do = realize(pair.l1_lexicon, pv, pt, pr, Structure::do_);
    const bool verb_final = !config.shared_structure;
    item.target_po = realize(pair.l2_lexicon, tv, tt, tr, Structure::po, verb_final);
    item.target_do = realize(pair.l2_lexicon, tv, tt, tr, Structure::do_, verb_final);
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace xlp
