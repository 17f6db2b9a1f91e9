#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xlprime/corpus.hpp"

namespace xlp {

/// Character n-gram language identifier over the two configured languages.
///
/// Both tables share one support: every n-gram observed in either language plus an
/// unknown bucket, each smoothed with add-`smoothing` counts.
class LangIdModel {
 public:
  static LangIdModel train(const CorpusShard& l1, const CorpusShard& l2, std::size_t order = 2,
                           double smoothing = 0.5);

  /// log P(text | lang) - log P(text | other(lang)).
  double log_odds(std::string_view text, Language lang) const;
  double log_prob(std::string_view text, Language lang) const;

  std::size_t order() const { return order_; }
  double smoothing() const { return smoothing_; }
  std::size_t support_size() const { return index_.size() + 1; }
  /// Log-probability of each support entry (unknown bucket last).
  std::vector<double> table(Language lang) const;

 private:
  std::vector<std::string> ngrams(std::string_view text) const;

  std::size_t order_ = 2;
  double smoothing_ = 0.5;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> logp_[2];
  double unknown_logp_[2] = {0.0, 0.0};
};

struct LineScore {
  std::size_t line_index = 0;
  double log_odds = 0.0;
  bool flagged = false;
};

struct ContaminationReport {
  std::size_t scanned_lines = 0;
  std::size_t flagged_lines = 0;
  double flagged_fraction = 0.0;
  std::vector<LineScore> per_line_scores;

  /// CSV with header `line_index,log_odds,flagged`.
  std::string to_csv() const;
};

/// Flags each document whose log-odds toward the other language exceeds `threshold`.
ContaminationReport scan_contamination(const CorpusShard& shard, const LangIdModel& model,
                                       double threshold = 0.0);

}  // namespace xlp
