#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xlprime/corpus.hpp"
#include "xlprime/model.hpp"
#include "xlprime/optimizer.hpp"
#include "xlprime/tokenizer.hpp"

namespace xlp {

/// Coarse checkpoints every `coarse_interval` steps from 0, plus `boundary + offset` for each
/// fine offset, plus the final step.
struct CheckpointSchedule {
  std::uint64_t coarse_interval = 0;  ///< 0 means total_steps / 10
  std::vector<std::uint64_t> fine_offsets;

  std::vector<std::uint64_t> steps(const CurriculumSchedule& curriculum) const;
};

/// Fine offsets {0, k, 2k, ..., 20k} with k = max(1, round(10 * total_steps / 1e6)): the
/// 10-step spacing of a 1M-step run, scaled to `total_steps`.
std::vector<std::uint64_t> default_fine_offsets(std::uint64_t total_steps);

enum class DType { float32, float64 };

const char* to_string(DType dtype) noexcept;
DType parse_dtype(std::string_view text);

struct PretrainConfig {
  ModelConfig model;
  AdamConfig adam;
  CurriculumSchedule curriculum;
  CheckpointSchedule checkpoints;
  DType dtype = DType::float32;
  std::uint64_t data_seed = 0;  ///< packing order of both streams
};

inline constexpr std::string_view kTrainingLogHeader = "step,loss_nats,lr,l1_tokens_seen,l2_tokens_seen";

std::string checkpoint_filename(std::uint64_t step);

struct PretrainHooks {
  /// Stop cleanly once this many steps are complete (a checkpoint is written there).
  std::optional<std::uint64_t> stop_at;
  /// Polled before every step; returning true saves a checkpoint and throws InterruptedError.
  std::function<bool()> interrupted;
  /// Called after every step with (completed steps, loss).
  std::function<void(std::uint64_t, double)> progress;
};

struct PretrainResult {
  std::uint64_t resumed_from = 0;  ///< 0 for a fresh run
  std::uint64_t completed_steps = 0;
  std::vector<std::filesystem::path> checkpoints;  ///< every scheduled checkpoint now on disk
};

/// Runs (or resumes) the curriculum in `dir`: checkpoints `ckpt_step_XXXXXXXX.bin` and
/// `training_log.csv`. Resumption restarts from the newest checkpoint and reproduces the
/// uninterrupted run bit for bit.
PretrainResult pretrain(const PretrainConfig& config, const CorpusShard& l1, const CorpusShard& l2,
                        const Tokenizer& tokenizer, const std::filesystem::path& dir,
                        const PretrainHooks& hooks = {});

}  // namespace xlp
