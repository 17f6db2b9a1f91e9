#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlprime/lmm.hpp"

namespace xlp {

/// Upper tail of the chi-square distribution.
double chi2_sf(double x, double df);
/// Upper tail P(T > x) of Student's t.
double t_sf(double x, double df);

struct LrtResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool clamped = false;  ///< a tiny negative deviance difference was set to 0
};

/// Likelihood-ratio test of nested ML fits sharing rows and grouping.
LrtResult lrt(const LmmFit& full, const LmmFit& reduced);

struct WaldResult {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double df = 0.0;  ///< n - p
  double p_value = 1.0;  ///< two-sided
};

WaldResult wald_t(const LmmFit& fit, std::string_view term);

enum class PAdjust { holm, bonferroni, bh };

const char* to_string(PAdjust method) noexcept;
PAdjust parse_padjust(std::string_view text);

/// Family-wise (holm, bonferroni) or false-discovery (bh) adjustment; output in input order.
std::vector<double> adjust_pvalues(std::span<const double> p, PAdjust method);

}  // namespace xlp
