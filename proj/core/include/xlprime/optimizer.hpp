#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xlprime/corpus.hpp"
#include "xlprime/model.hpp"

namespace xlp {

enum class LrSchedule { constant, cosine };

const char* to_string(LrSchedule schedule) noexcept;
LrSchedule parse_lr_schedule(const std::string& text);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled (AdamW) decay on matrices and embeddings.
  double weight_decay = 0.0;
  /// Global-norm gradient clip; 0 disables.
  double grad_clip = 1.0;
  std::uint64_t warmup_steps = 0;
  LrSchedule schedule = LrSchedule::constant;
  /// Horizon of the cosine schedule.
  std::uint64_t total_steps = 0;
  double min_lr_ratio = 0.1;

  bool operator==(const AdamConfig&) const = default;
};

/// Learning rate used by the update that completes step `step + 1`.
double learning_rate_at(const AdamConfig& config, std::uint64_t step);

template <typename T>
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;  ///< completed updates
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

template <typename T>
OptimizerState<T> init_optimizer(const Parameters<T>& params, const AdamConfig& config);

struct StepResult {
  double loss = 0.0;  ///< mean next-token cross-entropy before the update, nats
  double learning_rate = 0.0;
  double grad_norm = 0.0;
};

/// One AdamW update on a batch of equal-length sequences. Deterministic given
/// (params, state, batch). A non-finite loss or gradient throws NumericError
/// naming the step and the largest |gradient| entry.
template <typename T>
StepResult train_step(Parameters<T>& params, OptimizerState<T>& state, std::span<const TokenSequence> batch);

/// Mean next-token cross-entropy without updating anything.
template <typename T>
double evaluate_loss(const Parameters<T>& params, std::span<const TokenSequence> batch);

}  // namespace xlp
