#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xlp {

using TokenId = std::int32_t;

struct MergeRule {
  int rank = 0;
  std::string left;
  std::string right;
  std::string merged;
};

/// Share of the tokenizer training text drawn from each language, by character volume.
struct LanguageProportions {
  double l1 = 0.75;
  double l2 = 0.25;
};

struct TrainingText {
  std::string l1_part;
  std::string l2_part;
};

/// Builds the proportioned training text.
///
/// The total budget is the character length of the shortest sample with a nonzero share;
/// each language contributes round(budget * share) leading characters of its sample.
TrainingText build_training_text(std::string_view l1_sample, std::string_view l2_sample,
                                 LanguageProportions proportions);

/// Whitespace-and-punctuation pre-split. Chunks partition the input exactly; a single
/// space preceding a word or punctuation run is attached to that run.
std::vector<std::string_view> pretokenize(std::string_view text);

/// Byte-level BPE tokenizer. Ids 0..255 are raw bytes, merge outputs follow in order of first
/// appearance, and the end-of-document special is the last id.
class Tokenizer {
 public:
  static constexpr int kFormatVersion = 1;
  static constexpr TokenId kByteTokens = 256;
  /// Bytes plus the end-of-document special.
  static constexpr std::size_t kBaseAlphabet = 257;
  static constexpr std::string_view kEndOfDocument = "<|endoftext|>";

  /// Greedy merges by pair frequency; equal counts are broken lexicographically on
  /// (left, right) compared as byte strings. The resulting vocabulary has exactly
  /// `vocab_size` entries; a corpus that runs out of pairs first is a DataError.
  static Tokenizer train(std::string_view l1_sample, std::string_view l2_sample,
                         LanguageProportions proportions, std::size_t vocab_size,
                         std::uint64_t seed);

  /// Trains directly on `text` (no proportioning).
  static Tokenizer train_on_text(std::string_view text, std::size_t vocab_size,
                                 std::uint64_t seed);

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  TokenId end_of_document() const { return static_cast<TokenId>(tokens_.size() - 1); }
  std::size_t vocab_size() const { return tokens_.size(); }
  const std::vector<MergeRule>& merges() const { return merges_; }
  /// Raw bytes of a token (the literal special string for end-of-document).
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token_bytes) const;
  std::uint64_t seed() const { return seed_; }

  std::string to_json() const;
  static Tokenizer from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static Tokenizer load(const std::filesystem::path& path);
  /// SHA-256 of the serialized form.
  std::string fingerprint() const;

 private:
  Tokenizer() = default;
  void rebuild_indexes();
  void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const;

  std::vector<std::string> tokens_;
  std::vector<MergeRule> merges_;
  struct MergeIds {
    TokenId left;
    TokenId right;
    TokenId merged;
  };
  // (left id, right id) -> rank
  std::unordered_map<std::uint64_t, int> merge_lookup_;
  std::vector<MergeIds> merge_ids_;
  std::unordered_map<std::string, TokenId> token_lookup_;
  std::uint64_t seed_ = 0;
};

}  // namespace xlp
