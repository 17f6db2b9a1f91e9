#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "xlprime/model.hpp"
#include "xlprime/tokenizer.hpp"

namespace xlp {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Identifies the dropout masks of one training sequence; masks are a pure function of it.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t sequence = 0;
};

/// Per-position log-distributions over the vocabulary (rows = positions), evaluation mode.
template <typename T>
Matrix<T> forward_logprobs(const Parameters<T>& params, std::span<const TokenId> tokens);

/// Mean next-token cross-entropy of one sequence plus its gradient, accumulated into `grads`
/// with weight `scale` (gradient of scale * summed CE). Returns the summed CE in nats.
/// Dropout is applied when `dropout` is non-null and the config rate is positive.
template <typename T>
double accumulate_gradients(const Parameters<T>& params, std::span<const TokenId> tokens, double scale,
                            Parameters<T>& grads, const DropoutKey* dropout = nullptr);

/// Sum over target positions of log P(token | context ++ preceding target tokens).
template <typename T>
double score_continuation(const Parameters<T>& params, std::span<const TokenId> context,
                          std::span<const TokenId> target);

}  // namespace xlp
