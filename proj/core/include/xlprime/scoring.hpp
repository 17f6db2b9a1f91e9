#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xlprime/model.hpp"
#include "xlprime/stimuli.hpp"
#include "xlprime/tokenizer.hpp"

namespace xlp {

/// Anything that assigns log P(target | context) to token sequences.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual double score_continuation(std::span<const TokenId> context, std::span<const TokenId> target) const = 0;
};

/// Scores with a transformer in double precision (evaluation mode).
class LmScorer final : public SequenceScorer {
 public:
  explicit LmScorer(const Parameters<double>& params) : params_(params) {}
  double score_continuation(std::span<const TokenId> context, std::span<const TokenId> target) const override;

 private:
  const Parameters<double>& params_;
};

/// Text placed between prime and target. Trailing whitespace of the joiner is tokenized with
/// the target ("the" becomes " the"), so the target's token split never depends on the prime.
struct Joiner {
  std::string text = ". ";
};

struct PrimeTargetTokens {
  std::vector<TokenId> context;  ///< prime plus the joiner's non-whitespace head
  std::vector<TokenId> target;
};

PrimeTargetTokens split_prime_target(const Tokenizer& tokenizer, std::string_view prime, std::string_view target,
                                     const Joiner& joiner);

/// log P(target | prime ++ joiner), summed over the target's tokens only.
double conditional_logprob(const SequenceScorer& scorer, const Tokenizer& tokenizer, std::string_view prime,
                           std::string_view target, const Joiner& joiner);

/// exp(lp_po) / (exp(lp_po) + exp(lp_do)) as a single logistic of the difference.
/// normalized_prob(a, b) + normalized_prob(b, a) == 1 exactly.
double normalized_prob(double lp_po_target, double lp_do_target);

struct PrimingMeasurement {
  std::uint64_t step = 0;
  std::int64_t item_id = 0;
  PrimeType prime_type = PrimeType::po;
  double lp_po_target = 0.0;
  double lp_do_target = 0.0;
  double p_n_po_target = 0.5;
  /// Target token counts, for per-token diagnostics.
  std::size_t po_target_tokens = 0;
  std::size_t do_target_tokens = 0;

  double mean_lp_po_target() const { return lp_po_target / static_cast<double>(po_target_tokens); }
  double mean_lp_do_target() const { return lp_do_target / static_cast<double>(do_target_tokens); }
};

/// Both prime conditions of one item: [0] after the PO prime, [1] after the DO prime.
std::array<PrimingMeasurement, 2> measure_item(const SequenceScorer& scorer, const Tokenizer& tokenizer,
                                               const StimulusItem& item, const Joiner& joiner,
                                               std::uint64_t step = 0);

/// P_N(T_PO | P_PO) - P_N(T_PO | P_DO); positive values indicate priming.
double priming_effect(const SequenceScorer& scorer, const Tokenizer& tokenizer, const StimulusItem& item,
                      const Joiner& joiner);

}  // namespace xlp
