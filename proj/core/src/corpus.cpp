#include "xlprime/corpus.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "xlprime/error.hpp"
#include "xlprime/io.hpp"
#include "xlprime/rng.hpp"
#include "xlprime/utf8.hpp"

namespace xlp {

const char* to_string(Language lang) noexcept { return lang == Language::l1 ? "L1" : "L2"; }

Language parse_language(std::string_view text) {
  if (text == "L1" || text == "l1") return Language::l1;
  if (text == "L2" || text == "l2") return Language::l2;
  throw ConfigError("unknown language tag '" + std::string(text) + "' (expected L1 or L2)");
}

CorpusShard ingest_text(std::string_view text, Language language, std::string_view origin) {
  if (auto bad = utf8::first_invalid(text)) {
    throw DataError(std::string(origin) + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
  }
  CorpusShard shard;
  shard.language = language;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t\f\v\r") != std::string_view::npos) {
      shard.documents.emplace_back(line);
    }
    pos = end + 1;
  }
  if (shard.documents.empty()) throw DataError(std::string(origin) + ": no non-empty lines");
  return shard;
}

CorpusShard ingest(const std::filesystem::path& path, Language language) {
  return ingest_text(read_file(path), language, path.string());
}

void CurriculumSchedule::validate() const {
  if (batch_size == 0) throw ConfigError("schedule: batch_size must be positive");
  if (seq_len < 2) throw ConfigError("schedule: seq_len must be at least 2");
  if (phase_boundary > total_steps) {
    throw ConfigError("schedule: phase_boundary " + std::to_string(phase_boundary) +
                      " exceeds total_steps " + std::to_string(total_steps));
  }
  for (auto [mix, name] : {std::pair{phase1_mix, "phase1_mix"}, std::pair{phase2_mix, "phase2_mix"}}) {
    if (!(mix >= 0.0 && mix <= 1.0)) throw ConfigError(std::string("schedule: ") + name + " must lie in [0, 1]");
    const double share = mix * batch_size;
    if (std::abs(share - std::round(share)) > 1e-9) {
      throw ConfigError(std::string("schedule: batch_size * ") + name + " = " + std::to_string(share) +
                        " is not an integer");
    }
  }
}

std::uint32_t CurriculumSchedule::l2_sequences(std::uint64_t step) const {
  const double mix = step < phase_boundary ? phase1_mix : phase2_mix;
  return static_cast<std::uint32_t>(std::llround(mix * batch_size));
}

BatchPlan plan_batch(std::uint64_t step, const CurriculumSchedule& schedule) {
  if (step >= schedule.total_steps) {
    throw ConfigError("plan_batch: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(schedule.total_steps) + ")");
  }
  BatchPlan plan;
  plan.step = step;
  plan.l2_sequences = schedule.l2_sequences(step);
  plan.l1_sequences = schedule.batch_size - plan.l2_sequences;
  return plan;
}

TokenCounts tokens_seen(std::uint64_t step, const CurriculumSchedule& schedule) {
  if (step > schedule.total_steps) {
    throw ConfigError("tokens_seen: step " + std::to_string(step) + " exceeds total_steps " +
                      std::to_string(schedule.total_steps));
  }
  const std::uint64_t phase1_steps = std::min(step, schedule.phase_boundary);
  const std::uint64_t phase2_steps = step - phase1_steps;
  const auto l2_a = static_cast<std::uint64_t>(std::llround(schedule.phase1_mix * schedule.batch_size));
  const auto l2_b = static_cast<std::uint64_t>(std::llround(schedule.phase2_mix * schedule.batch_size));
  const std::uint64_t batch = schedule.batch_size;
  const std::uint64_t l2_seq = phase1_steps * l2_a + phase2_steps * l2_b;
  TokenCounts counts;
  counts.l2 = l2_seq * schedule.seq_len;
  counts.l1 = (step * batch - l2_seq) * schedule.seq_len;
  return counts;
}

std::vector<TokenSequence> encode_documents(const CorpusShard& shard, const Tokenizer& tokenizer) {
  std::unordered_map<std::string_view, std::vector<TokenId>> cache;
  std::vector<TokenSequence> out;
  out.reserve(shard.documents.size());
  for (const auto& doc : shard.documents) {
    TokenSequence ids;
    for (auto chunk : pretokenize(doc)) {
      auto it = cache.find(chunk);
      if (it == cache.end()) it = cache.emplace(chunk, tokenizer.encode(chunk)).first;
      ids.insert(ids.end(), it->second.begin(), it->second.end());
    }
    out.push_back(std::move(ids));
  }
  return out;
}

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  return epoch == 0 ? seed : derive_seed(seed, "epoch-" + std::to_string(epoch));
}

std::vector<TokenSequence> pack_epoch(const std::vector<TokenSequence>& documents, std::size_t seq_len,
                                      std::uint64_t seed) {
  std::vector<std::size_t> order(documents.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<TokenSequence> blocks;
  TokenSequence current;
  current.reserve(seq_len);
  for (auto idx : order) {
    for (auto id : documents[idx]) {
      current.push_back(id);
      if (current.size() == seq_len) {
        blocks.push_back(std::move(current));
        current = TokenSequence();
        current.reserve(seq_len);
      }
    }
  }
  return blocks;
}

std::vector<TokenSequence> with_separators(std::vector<TokenSequence> docs, TokenId separator) {
  for (auto& d : docs) d.push_back(separator);
  return docs;
}

std::size_t total_tokens(const std::vector<TokenSequence>& docs) {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

}  // namespace

std::vector<TokenSequence> pack_sequences(const CorpusShard& shard, const Tokenizer& tokenizer,
                                          std::size_t seq_len, std::uint64_t seed) {
  if (seq_len < 2) throw ConfigError("pack_sequences: seq_len must be at least 2");
  const auto docs = with_separators(encode_documents(shard, tokenizer), tokenizer.end_of_document());
  const auto total = total_tokens(docs);
  if (total < seq_len) {
    throw DataError("pack_sequences: " + std::string(to_string(shard.language)) + " shard holds " +
                    std::to_string(total) + " tokens, fewer than one block of " + std::to_string(seq_len));
  }
  return pack_epoch(docs, seq_len, seed);
}

PackedStream::PackedStream(const CorpusShard& shard, const Tokenizer& tokenizer, std::size_t seq_len,
                           std::uint64_t seed)
    : documents_(with_separators(encode_documents(shard, tokenizer), tokenizer.end_of_document())),
      seq_len_(seq_len),
      seed_(seed) {
  if (seq_len < 2) throw ConfigError("PackedStream: seq_len must be at least 2");
  blocks_ = total_tokens(documents_) / seq_len;
  if (blocks_ == 0) {
    throw DataError("PackedStream: " + std::string(to_string(shard.language)) +
                    " shard is too small for one block of " + std::to_string(seq_len) + " tokens");
  }
}

void PackedStream::load_epoch() {
  if (loaded_epoch_ == state_.epoch) return;
  epoch_blocks_ = pack_epoch(documents_, seq_len_, epoch_seed(seed_, state_.epoch));
  loaded_epoch_ = state_.epoch;
}

TokenSequence PackedStream::next() {
  if (state_.cursor >= blocks_) {
    state_.epoch += 1;
    state_.cursor = 0;
  }
  load_epoch();
  return epoch_blocks_[state_.cursor++];
}

void PackedStream::restore(State state) {
  if (state.cursor > blocks_) throw DataError("PackedStream: restored cursor beyond epoch length");
  state_ = state;
}

}  // namespace xlp
