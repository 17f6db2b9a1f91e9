#include "xlprime/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "xlprime/error.hpp"
#include "xlprime/hash.hpp"
#include "xlprime/io.hpp"
#include "xlprime/utf8.hpp"

namespace xlp {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t pair_key(TokenId left, TokenId right) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(left)) << 32) |
         static_cast<std::uint32_t>(right);
}

enum class ByteClass { space, punct, word };

ByteClass classify(unsigned char c) {
  switch (c) {
    case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
      return ByteClass::space;
    default:
      break;
  }
  if (c < 0x80 && ((c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
                   (c >= '{' && c <= '~'))) {
    return ByteClass::punct;
  }
  return ByteClass::word;
}

// GPT-2's printable stand-ins for raw bytes, so serialized tokens are always valid UTF-8.
const std::vector<std::string>& byte_symbols() {
  static const std::vector<std::string> table = [] {
    std::vector<int> cps(256, -1);
    for (int b = 0; b < 256; ++b) {
      if ((b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF)) {
        cps[b] = b;
      }
    }
    int next = 256;
    for (int b = 0; b < 256; ++b) {
      if (cps[b] < 0) cps[b] = next++;
    }
    std::vector<std::string> out(256);
    for (int b = 0; b < 256; ++b) {
      const int cp = cps[b];
      std::string s;
      if (cp < 0x80) {
        s.push_back(static_cast<char>(cp));
      } else {
        s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
      }
      out[b] = s;
    }
    return out;
  }();
  return table;
}

std::string bytes_to_symbols(std::string_view bytes) {
  const auto& table = byte_symbols();
  std::string out;
  for (unsigned char b : bytes) out += table[b];
  return out;
}

std::string symbols_to_bytes(std::string_view symbols) {
  static const std::unordered_map<std::string, unsigned char> reverse = [] {
    std::unordered_map<std::string, unsigned char> m;
    const auto& table = byte_symbols();
    for (int b = 0; b < 256; ++b) m.emplace(table[b], static_cast<unsigned char>(b));
    return m;
  }();
  if (utf8::first_invalid(symbols)) throw DataError("tokenizer: token string is not valid UTF-8");
  std::string out;
  for (auto ch : utf8::characters(symbols)) {
    auto it = reverse.find(std::string(ch));
    if (it == reverse.end()) {
      throw DataError("tokenizer: unexpected symbol '" + std::string(ch) + "' in token string");
    }
    out.push_back(static_cast<char>(it->second));
  }
  return out;
}

// Greedy BPE trainer over unique pre-tokenized chunks.
class MergeTrainer {
 public:
  MergeTrainer(std::vector<std::string>& tokens, const std::vector<std::string_view>& chunks)
      : tokens_(tokens), queue_(QueueOrder{&tokens}) {
    std::unordered_map<std::string_view, std::size_t> index;
    for (auto chunk : chunks) {
      auto [it, inserted] = index.emplace(chunk, words_.size());
      if (inserted) {
        Word w;
        w.symbols.reserve(chunk.size());
        for (unsigned char b : chunk) w.symbols.push_back(static_cast<TokenId>(b));
        words_.push_back(std::move(w));
      }
      words_[it->second].count += 1;
    }
    for (std::size_t i = 0; i < words_.size(); ++i) add_pairs(i);
  }

  // Returns the winning pair, or nullopt if no adjacent pairs remain.
  std::optional<std::pair<TokenId, TokenId>> best() const {
    if (queue_.empty()) return std::nullopt;
    const auto& top = *queue_.begin();
    return std::make_pair(top.left, top.right);
  }

  void apply(TokenId left, TokenId right, TokenId merged) {
    const auto key = pair_key(left, right);
    auto where_it = where_.find(key);
    if (where_it == where_.end()) return;
    const std::vector<std::size_t> affected(where_it->second.begin(), where_it->second.end());
    for (auto wi : affected) {
      auto& w = words_[wi];
      remove_pairs(wi);
      std::vector<TokenId> rewritten;
      rewritten.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size();) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          rewritten.push_back(merged);
          i += 2;
        } else {
          rewritten.push_back(w.symbols[i]);
          ++i;
        }
      }
      w.symbols = std::move(rewritten);
      add_pairs(wi);
    }
  }

 private:
  struct Word {
    std::vector<TokenId> symbols;
    std::int64_t count = 0;
  };
  struct Entry {
    std::int64_t count;
    TokenId left;
    TokenId right;
  };
  struct QueueOrder {
    const std::vector<std::string>* tokens;
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.count != b.count) return a.count > b.count;
      if (a.left != b.left) {
        const int c = (*tokens)[a.left].compare((*tokens)[b.left]);
        if (c != 0) return c < 0;
      }
      if (a.right != b.right) return (*tokens)[a.right].compare((*tokens)[b.right]) < 0;
      return false;
    }
  };

  void adjust(TokenId left, TokenId right, std::int64_t delta, std::size_t word) {
    const auto key = pair_key(left, right);
    auto& count = counts_[key];
    if (count > 0) queue_.erase(Entry{count, left, right});
    count += delta;
    if (count > 0) {
      queue_.insert(Entry{count, left, right});
      if (delta > 0) where_[key].insert(word);
    } else {
      counts_.erase(key);
      where_.erase(key);
    }
  }

  void add_pairs(std::size_t wi) {
    const auto& w = words_[wi];
    for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
      adjust(w.symbols[i], w.symbols[i + 1], w.count, wi);
    }
  }

  void remove_pairs(std::size_t wi) {
    const auto& w = words_[wi];
    for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
      const auto key = pair_key(w.symbols[i], w.symbols[i + 1]);
      if (auto it = where_.find(key); it != where_.end()) it->second.erase(wi);
      adjust(w.symbols[i], w.symbols[i + 1], -w.count, wi);
    }
  }

  std::vector<std::string>& tokens_;
  std::vector<Word> words_;
  std::unordered_map<std::uint64_t, std::int64_t> counts_;
  std::unordered_map<std::uint64_t, std::unordered_set<std::size_t>> where_;
  std::set<Entry, QueueOrder> queue_;
};

}  // namespace

TrainingText build_training_text(std::string_view l1_sample, std::string_view l2_sample,
                                 LanguageProportions proportions) {
  if (proportions.l1 < 0.0 || proportions.l2 < 0.0 ||
      std::abs(proportions.l1 + proportions.l2 - 1.0) > 1e-9) {
    throw ConfigError("tokenizer: proportions must be non-negative and sum to 1");
  }
  for (auto [sample, share, name] : {std::tuple{l1_sample, proportions.l1, "L1"},
                                     std::tuple{l2_sample, proportions.l2, "L2"}}) {
    if (share > 0.0 && sample.empty()) {
      throw DataError(std::string("tokenizer: empty ") + name + " sample with nonzero proportion");
    }
    if (auto bad = utf8::first_invalid(sample)) {
      throw DataError(std::string("tokenizer: ") + name + " sample has invalid UTF-8 at byte " +
                      std::to_string(*bad));
    }
  }
  const std::size_t len1 = utf8::length(l1_sample);
  const std::size_t len2 = utf8::length(l2_sample);
  std::size_t budget = SIZE_MAX;
  if (proportions.l1 > 0.0) budget = std::min(budget, len1);
  if (proportions.l2 > 0.0) budget = std::min(budget, len2);
  auto take = [budget](double share, std::size_t available) {
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(budget) * share));
    return std::min(n, available);
  };
  TrainingText out;
  out.l1_part = std::string(utf8::prefix(l1_sample, take(proportions.l1, len1)));
  out.l2_part = std::string(utf8::prefix(l2_sample, take(proportions.l2, len2)));
  return out;
}

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> out;
  const std::size_t n = text.size();
  auto cls = [&](std::size_t i) { return classify(static_cast<unsigned char>(text[i])); };
  std::size_t i = 0;
  while (i < n) {
    if (cls(i) == ByteClass::space) {
      std::size_t j = i;
      while (j < n && cls(j) == ByteClass::space) ++j;
      // A trailing ' ' before a non-space run belongs to that run.
      if (j < n && text[j - 1] == ' ') {
        if (j - 1 > i) {
          out.push_back(text.substr(i, j - 1 - i));
        }
        i = j - 1;
      } else {
        out.push_back(text.substr(i, j - i));
        i = j;
        continue;
      }
    }
    std::size_t j = i;
    if (text[j] == ' ') ++j;
    const auto run = cls(j);
    while (j < n && cls(j) == run) ++j;
    out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Tokenizer Tokenizer::train(std::string_view l1_sample, std::string_view l2_sample,
                           LanguageProportions proportions, std::size_t vocab_size,
                           std::uint64_t seed) {
  const auto text = build_training_text(l1_sample, l2_sample, proportions);
  return train_on_text(text.l1_part + text.l2_part, vocab_size, seed);
}

Tokenizer Tokenizer::train_on_text(std::string_view text, std::size_t vocab_size,
                                   std::uint64_t seed) {
  if (vocab_size <= kBaseAlphabet) {
    throw ConfigError("tokenizer: vocab_size " + std::to_string(vocab_size) +
                      " must exceed the base alphabet of " + std::to_string(kBaseAlphabet));
  }
  Tokenizer tok;
  tok.seed_ = seed;
  tok.tokens_.reserve(vocab_size);
  for (int b = 0; b < kByteTokens; ++b) tok.tokens_.emplace_back(1, static_cast<char>(b));

  const auto chunks = pretokenize(text);
  MergeTrainer trainer(tok.tokens_, chunks);
  std::unordered_map<std::string, TokenId> existing;
  for (int b = 0; b < kByteTokens; ++b) existing.emplace(tok.tokens_[static_cast<std::size_t>(b)], b);
  while (tok.tokens_.size() + 1 < vocab_size) {
    auto best = trainer.best();
    if (!best) {
      throw DataError("tokenizer: corpus supports only " + std::to_string(tok.tokens_.size() + 1) +
                      " vocabulary entries; vocab_size " + std::to_string(vocab_size) +
                      " is unattainable");
    }
    const auto [left, right] = *best;
    MergeRule rule;
    rule.rank = static_cast<int>(tok.merges_.size());
    rule.left = tok.tokens_[static_cast<std::size_t>(left)];
    rule.right = tok.tokens_[static_cast<std::size_t>(right)];
    rule.merged = rule.left + rule.right;
    // Two merge paths can spell the same string; they share one vocabulary entry.
    auto [it, inserted] = existing.emplace(rule.merged, static_cast<TokenId>(tok.tokens_.size()));
    if (inserted) tok.tokens_.push_back(rule.merged);
    tok.merges_.push_back(std::move(rule));
    trainer.apply(left, right, it->second);
  }
  tok.tokens_.emplace_back(kEndOfDocument);
  tok.rebuild_indexes();
  return tok;
}

void Tokenizer::rebuild_indexes() {
  token_lookup_.clear();
  merge_lookup_.clear();
  merge_ids_.clear();
  // The special is deliberately absent from token_lookup_: its bytes encode as ordinary text.
  for (std::size_t id = 0; id + 1 < tokens_.size(); ++id) {
    if (!token_lookup_.emplace(tokens_[id], static_cast<TokenId>(id)).second) {
      throw DataError("tokenizer: duplicate vocabulary entry at id " + std::to_string(id));
    }
  }
  for (const auto& m : merges_) {
    const auto l = token_lookup_.at(m.left);
    const auto r = token_lookup_.at(m.right);
    const auto merged = token_lookup_.at(m.merged);
    // A later duplicate of an earlier pair can never fire; keep the first rank.
    merge_lookup_.emplace(pair_key(l, r), m.rank);
    merge_ids_.push_back({l, r, merged});
  }
}

const std::string& Tokenizer::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("tokenizer: unknown token id " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Tokenizer::find(std::string_view token_bytes) const {
  auto it = token_lookup_.find(std::string(token_bytes));
  if (it == token_lookup_.end()) return std::nullopt;
  return it->second;
}

void Tokenizer::encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
  std::vector<TokenId> symbols;
  symbols.reserve(chunk.size());
  for (unsigned char b : chunk) symbols.push_back(static_cast<TokenId>(b));
  while (symbols.size() > 1) {
    int best = -1;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_lookup_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != merge_lookup_.end() && (best < 0 || it->second < best)) best = it->second;
    }
    if (best < 0) break;
    const auto& ids = merge_ids_[static_cast<std::size_t>(best)];
    std::size_t w = 0;
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == ids.left && symbols[i + 1] == ids.right) {
        symbols[w++] = ids.merged;
        i += 2;
      } else {
        symbols[w++] = symbols[i++];
      }
    }
    symbols.resize(w);
  }
  out.insert(out.end(), symbols.begin(), symbols.end());
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (auto chunk : pretokenize(text)) encode_chunk(chunk, out);
  return out;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (auto id : ids) out += token(id);
  return out;
}

std::string Tokenizer::to_json() const {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "byte-bpe";
  j["pretokenizer"] = "whitespace-punctuation";
  j["seed"] = seed_;
  ordered_json vocab = ordered_json::object();
  for (std::size_t id = 0; id + 1 < tokens_.size(); ++id) {
    vocab[bytes_to_symbols(tokens_[id])] = id;
  }
  vocab[std::string(kEndOfDocument)] = tokens_.size() - 1;
  j["vocab"] = std::move(vocab);
  ordered_json merges = ordered_json::array();
  for (const auto& m : merges_) {
    merges.push_back(ordered_json::array({bytes_to_symbols(m.left), bytes_to_symbols(m.right)}));
  }
  j["merges"] = std::move(merges);
  j["specials"] = {{"end_of_document", std::string(kEndOfDocument)}};
  return j.dump(1) + "\n";
}

Tokenizer Tokenizer::from_json(std::string_view json) {
  ordered_json j;
  try {
    j = ordered_json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tokenizer: malformed JSON: ") + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw DataError("tokenizer: unsupported format_version " + std::to_string(version) +
                      " (expected " + std::to_string(kFormatVersion) + ")");
    }
    Tokenizer tok;
    tok.seed_ = j.value("seed", std::uint64_t{0});
    const auto& merges = j.at("merges");
    const auto& vocab = j.at("vocab");
    const auto special = j.at("specials").at("end_of_document").get<std::string>();
    if (special != kEndOfDocument) throw DataError("tokenizer: unsupported end-of-document token");
    const std::size_t n = vocab.size();
    if (n <= kBaseAlphabet) throw DataError("tokenizer: vocab is smaller than the byte alphabet");
    tok.tokens_.resize(n);
    std::vector<bool> seen(n, false);
    for (const auto& [key, value] : vocab.items()) {
      const auto id = value.get<std::size_t>();
      if (id >= n || seen[id]) throw DataError("tokenizer: vocab ids are not contiguous from 0");
      seen[id] = true;
      tok.tokens_[id] = (id == n - 1) ? key : symbols_to_bytes(key);
    }
    if (tok.tokens_[n - 1] != kEndOfDocument) {
      throw DataError("tokenizer: end-of-document must have the last id");
    }
    for (int b = 0; b < kByteTokens; ++b) {
      if (tok.tokens_[static_cast<std::size_t>(b)] != std::string(1, static_cast<char>(b))) {
        throw DataError("tokenizer: byte tokens must occupy ids 0..255");
      }
    }
    for (std::size_t r = 0; r < merges.size(); ++r) {
      MergeRule m;
      m.rank = static_cast<int>(r);
      m.left = symbols_to_bytes(merges[r].at(0).get<std::string>());
      m.right = symbols_to_bytes(merges[r].at(1).get<std::string>());
      m.merged = m.left + m.right;
      tok.merges_.push_back(std::move(m));
    }
    tok.rebuild_indexes();
    return tok;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tokenizer: bad model file: ") + e.what());
  } catch (const std::out_of_range&) {
    throw DataError("tokenizer: a merge refers to a token missing from the vocab");
  }
}

void Tokenizer::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

Tokenizer Tokenizer::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

std::string Tokenizer::fingerprint() const { return sha256_hex(to_json()); }

}  // namespace xlp
