#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xlprime/tokenizer.hpp"

namespace xlp {

/// The first language (phase-1 only) and the second (introduced at the boundary).
enum class Language { l1, l2 };

constexpr Language other(Language lang) { return lang == Language::l1 ? Language::l2 : Language::l1; }
const char* to_string(Language lang) noexcept;
Language parse_language(std::string_view text);

/// Newline-delimited documents of one language.
struct CorpusShard {
  Language language = Language::l1;
  std::vector<std::string> documents;
  std::optional<std::uint64_t> token_count;
};

/// Reads one document per line. Blank (whitespace-only) lines are dropped and a trailing
/// '\r' is stripped; invalid UTF-8 is reported with its byte offset.
CorpusShard ingest(const std::filesystem::path& path, Language language);

/// Same contract over in-memory text.
CorpusShard ingest_text(std::string_view text, Language language, std::string_view origin = "<memory>");

struct CurriculumSchedule {
  std::uint64_t total_steps = 0;
  std::uint64_t phase_boundary = 0;
  double phase1_mix = 0.0;  ///< L2 share of each batch before the boundary
  double phase2_mix = 0.5;  ///< L2 share from the boundary step onward
  std::uint32_t batch_size = 128;
  std::uint32_t seq_len = 128;

  /// Throws ConfigError if any invariant fails (including a non-integer L2 batch share).
  void validate() const;
  std::uint32_t l2_sequences(std::uint64_t step) const;
};

struct BatchPlan {
  std::uint64_t step = 0;
  std::uint32_t l1_sequences = 0;
  std::uint32_t l2_sequences = 0;
};

BatchPlan plan_batch(std::uint64_t step, const CurriculumSchedule& schedule);

struct TokenCounts {
  std::uint64_t l1 = 0;
  std::uint64_t l2 = 0;
};

/// Tokens consumed per language by steps [0, step).
TokenCounts tokens_seen(std::uint64_t step, const CurriculumSchedule& schedule);

using TokenSequence = std::vector<TokenId>;

/// One epoch of packing: documents in seeded order, each followed by the end-of-document
/// token, cut into contiguous `seq_len` blocks. The final partial block is dropped.
std::vector<TokenSequence> pack_sequences(const CorpusShard& shard, const Tokenizer& tokenizer,
                                          std::size_t seq_len, std::uint64_t seed);

/// Endless sequence source over a shard: epoch `e` is pack_sequences with a seed derived
/// from (seed, e). The whole state is (epoch, cursor), so it checkpoints exactly.
class PackedStream {
 public:
  struct State {
    std::uint64_t epoch = 0;
    std::uint64_t cursor = 0;
  };

  PackedStream(const CorpusShard& shard, const Tokenizer& tokenizer, std::size_t seq_len,
               std::uint64_t seed);

  TokenSequence next();
  State state() const { return state_; }
  void restore(State state);
  std::size_t sequences_per_epoch() const { return blocks_; }

 private:
  void load_epoch();

  std::vector<TokenSequence> documents_;  // tokenized, separator appended
  std::size_t seq_len_;
  std::uint64_t seed_;
  std::size_t blocks_ = 0;
  State state_;
  std::optional<std::uint64_t> loaded_epoch_;
  std::vector<TokenSequence> epoch_blocks_;
};

/// Encodes every document with a per-call cache of repeated pre-tokenized chunks.
std::vector<TokenSequence> encode_documents(const CorpusShard& shard, const Tokenizer& tokenizer);

}  // namespace xlp
