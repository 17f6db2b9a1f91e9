#include "xlprime/scoring.hpp"

#include <cmath>

#include "xlprime/error.hpp"
#include "xlprime/transformer.hpp"

namespace xlp {

double LmScorer::score_continuation(std::span<const TokenId> context, std::span<const TokenId> target) const {
  return xlp::score_continuation(params_, context, target);
}

PrimeTargetTokens split_prime_target(const Tokenizer& tokenizer, std::string_view prime, std::string_view target,
                                     const Joiner& joiner) {
  if (prime.empty() || target.empty()) throw DataError("prime and target must be non-empty");
  std::string_view head = joiner.text;
  while (!head.empty() && (head.back() == ' ' || head.back() == '\t' || head.back() == '\n' || head.back() == '\r')) {
    head.remove_suffix(1);
  }

  // Each sentence is scored as the start of a document, exactly as training presents them.
  PrimeTargetTokens out;
  out.context.push_back(tokenizer.end_of_document());
  const auto prime_ids = tokenizer.encode(prime);
  out.context.insert(out.context.end(), prime_ids.begin(), prime_ids.end());

  std::string tail = joiner.text;
  tail += target;
  const auto joint = tokenizer.encode(tail);
  std::size_t bytes = 0;
  std::size_t k = 0;
  while (k < joint.size() && bytes < head.size()) bytes += tokenizer.token(joint[k++]).size();
  if (bytes != head.size()) {
    throw DataError("joiner '" + joiner.text + "' merges into the target's first token; choose a joiner that ends in whitespace or punctuation");
  }
  out.context.insert(out.context.end(), joint.begin(), joint.begin() + static_cast<std::ptrdiff_t>(k));
  out.target.assign(joint.begin() + static_cast<std::ptrdiff_t>(k), joint.end());
  if (out.target.empty()) throw DataError("target tokenizes to nothing");
  return out;
}

double conditional_logprob(const SequenceScorer& scorer, const Tokenizer& tokenizer, std::string_view prime,
                           std::string_view target, const Joiner& joiner) {
  const auto split = split_prime_target(tokenizer, prime, target, joiner);
  const double lp = scorer.score_continuation(split.context, split.target);
  if (!std::isfinite(lp)) throw NumericError("non-finite log-probability for target '" + std::string(target) + "'");
  return lp;
}

double normalized_prob(double lp_po_target, double lp_do_target) {
  if (!std::isfinite(lp_po_target) || !std::isfinite(lp_do_target)) {
    throw NumericError("normalized_prob: non-finite log-probability");
  }
  // Evaluate the larger side directly and derive the other as its complement, so swapping the
  // arguments yields exactly 1 - p.
  if (lp_po_target >= lp_do_target) return 1.0 / (1.0 + std::exp(lp_do_target - lp_po_target));
  return 1.0 - normalized_prob(lp_do_target, lp_po_target);
}

namespace {

std::size_t target_tokens(const Tokenizer& tokenizer, std::string_view target, const Joiner& joiner) {
  return split_prime_target(tokenizer, "x", target, joiner).target.size();
}

}  // namespace

std::array<PrimingMeasurement, 2> measure_item(const SequenceScorer& scorer, const Tokenizer& tokenizer,
                                               const StimulusItem& item, const Joiner& joiner, std::uint64_t step) {
  std::array<PrimingMeasurement, 2> out;
  const std::size_t po_tokens = target_tokens(tokenizer, item.target_po, joiner);
  const std::size_t do_tokens = target_tokens(tokenizer, item.target_do, joiner);
  for (int k = 0; k < 2; ++k) {
    auto& m = out[static_cast<std::size_t>(k)];
    m.step = step;
    m.item_id = item.item_id;
    m.prime_type = k == 0 ? PrimeType::po : PrimeType::do_;
    const std::string& prime = k == 0 ? item.prime_po : item.prime_do;
    m.lp_po_target = conditional_logprob(scorer, tokenizer, prime, item.target_po, joiner);
    m.lp_do_target = conditional_logprob(scorer, tokenizer, prime, item.target_do, joiner);
    m.p_n_po_target = normalized_prob(m.lp_po_target, m.lp_do_target);
    m.po_target_tokens = po_tokens;
    m.do_target_tokens = do_tokens;
  }
  return out;
}

double priming_effect(const SequenceScorer& scorer, const Tokenizer& tokenizer, const StimulusItem& item,
                      const Joiner& joiner) {
  const auto m = measure_item(scorer, tokenizer, item, joiner);
  return m[0].p_n_po_target - m[1].p_n_po_target;
}

}  // namespace xlp
