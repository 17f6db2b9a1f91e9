#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "xlprime/corpus.hpp"
#include "xlprime/model.hpp"
#include "xlprime/optimizer.hpp"

namespace xlp {

/// Complete training state at a step boundary.
template <typename T>
struct Checkpoint {
  std::uint64_t step = 0;
  Parameters<T> params;
  OptimizerState<T> optimizer;
  PackedStream::State l1_stream;
  PackedStream::State l2_stream;
  std::string tokenizer_fingerprint;
};

/// File layout: magic "XLPCKPT\0", u32 format version, u64 header length, JSON header,
/// little-endian tensor payload (parameters, then Adam m, then Adam v), and a trailing
/// SHA-256 over everything before it.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::filesystem::path& path);

/// Loads and converts the payload to T. A mismatching `expected_fingerprint` is refused with
/// both hashes in the message.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path,
                              const std::optional<std::string>& expected_fingerprint = std::nullopt);

struct CheckpointHeader {
  std::uint32_t format_version = 0;
  std::uint64_t step = 0;
  std::string dtype;
  ModelConfig config;
  std::string tokenizer_fingerprint;
  std::string json;  ///< the header exactly as stored
};

/// Validates the checksum and returns the header.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Parameters only, converted to double for scoring.
Parameters<double> load_scoring_parameters(const std::filesystem::path& path,
                                           const std::optional<std::string>& expected_fingerprint = std::nullopt);

}  // namespace xlp
