#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xlprime/design.hpp"
#include "xlprime/inference.hpp"
#include "xlprime/lmm.hpp"
#include "xlprime/scoring.hpp"

namespace xlp {

struct AnalysisOptions {
  std::uint64_t baseline_step = 0;
  PAdjust correction = PAdjust::holm;
  double alpha = 0.05;
  Response response = Response::probability;
};

struct InteractionRow {
  std::uint64_t step = 0;
  WaldResult wald;
  double p_adjusted = 1.0;
  bool significant = false;
};

/// Prime x step interaction analysis: full vs. no-interaction LRT, Wald tests per
/// interaction term, adjusted within the interaction family.
struct AnalysisReport {
  AnalysisOptions options;
  LmmFit full;
  LmmFit reduced;
  LrtResult lrt;
  std::vector<WaldResult> coefficients;  ///< every term of the full model, in column order
  std::vector<InteractionRow> interactions;
  /// First step whose interaction is significant after correction.
  std::optional<std::uint64_t> earliest_significant;

  std::string to_text() const;
  /// `term,estimate,se,t,df,p_raw,p_adjusted`; p_adjusted is NA outside the interaction family.
  std::string coefficients_csv() const;
  /// `statistic,df,p`
  std::string lrt_csv() const;
};

AnalysisReport analyze(std::span<const PrimingMeasurement> rows, const AnalysisOptions& options);

struct StepSummary {
  std::uint64_t step = 0;
  std::size_t items = 0;
  double mean_after_po = 0.0;  ///< mean P_N(T_PO | PO prime)
  double mean_after_do = 0.0;  ///< mean P_N(T_PO | DO prime)
  double mean_effect = 0.0;    ///< mean per-item priming effect
};

/// Per-step means; items missing either prime type at a step are skipped.
std::vector<StepSummary> summarize_by_step(std::span<const PrimingMeasurement> rows);

}  // namespace xlp
