#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xlprime/analysis.hpp"

namespace xlp::cli {

struct PlotOptions {
  std::optional<std::uint64_t> boundary;  ///< drawn as a dashed vertical line when set
  std::string manifest_hash;              ///< echoed in the embedded data comment
};

/// Mean P_N(PO target) after PO and after DO primes, by checkpoint step.
std::string priming_svg(const std::vector<StepSummary>& steps, const PlotOptions& options);
/// Mean priming effect by checkpoint step, with a zero line.
std::string effect_svg(const std::vector<StepSummary>& steps, const PlotOptions& options);

}  // namespace xlp::cli
