#include "xlprime/analysis.hpp"

#include <cstdio>
#include <map>

#include "xlprime/error.hpp"
#include "xlprime/io.hpp"

namespace xlp {

AnalysisReport analyze(std::span<const PrimingMeasurement> rows, const AnalysisOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  AnalysisReport report;
  report.options = options;
  LmmSpec spec;
  spec.baseline_step = options.baseline_step;
  spec.response = options.response;
  const auto full = build_design(rows, spec);
  spec.include_interaction = false;
  const auto reduced = build_design(rows, spec);
  report.full = fit_lmm(full);
  report.reduced = fit_lmm(reduced);
  report.lrt = lrt(report.full, report.reduced);

  for (const auto& name : full.column_names) report.coefficients.push_back(wald_t(report.full, name));
  std::vector<double> raw;
  for (auto step : full.steps) {
    InteractionRow row;
    row.step = step;
    row.wald = wald_t(report.full, interaction_column(step));
    raw.push_back(row.wald.p_value);
    report.interactions.push_back(row);
  }
  const auto adjusted = adjust_pvalues(raw, options.correction);
  for (std::size_t k = 0; k < adjusted.size(); ++k) {
    auto& row = report.interactions[k];
    row.p_adjusted = adjusted[k];
    row.significant = adjusted[k] < options.alpha;
    if (row.significant && !report.earliest_significant) report.earliest_significant = row.step;
  }
  return report;
}

std::string AnalysisReport::coefficients_csv() const {
  std::map<std::string, double> adjusted;
  for (const auto& r : interactions) adjusted[r.wald.term] = r.p_adjusted;
  std::string out = "term,estimate,se,t,df,p_raw,p_adjusted\n";
  for (const auto& w : coefficients) {
    const auto it = adjusted.find(w.term);
    out += w.term + ',' + format_double(w.estimate) + ',' + format_double(w.se) + ',' + format_double(w.t) + ',' +
           format_double(w.df) + ',' + format_double(w.p_value) + ',' +
           (it == adjusted.end() ? std::string("NA") : format_double(it->second)) + '\n';
  }
  return out;
}

std::string AnalysisReport::lrt_csv() const {
  return "statistic,df,p\n" + format_double(lrt.statistic) + ',' + std::to_string(lrt.df) + ',' +
         format_double(lrt.p_value) + '\n';
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string p_text(double p) { return p < 0.001 ? "<0.001" : fmt("%.4f", p); }

}  // namespace

std::string AnalysisReport::to_text() const {
  std::string out;
  out += "Linear mixed model (ML), response ";
  out += options.response == Response::logit ? "logit P_N(T_PO)" : "P_N(T_PO)";
  out += " ~ prime * step + (1 | item)\n";
  out += "  n = " + std::to_string(full.n) + ", p = " + std::to_string(full.p) + ", items = " + std::to_string(full.g) +
         ", baseline step = " + std::to_string(options.baseline_step) + "\n";
  out += "  sigma2 = " + fmt("%.6g", full.sigma2) + ", tau2 = " + fmt("%.6g", full.tau2) +
         ", loglik = " + fmt("%.6f", full.loglik) + "\n\n";
  out += "Prime x step interaction (LRT): chi2(" + std::to_string(lrt.df) + ") = " + fmt("%.2f", lrt.statistic) +
         ", p " + (lrt.p_value < 0.001 ? std::string("< 0.001") : "= " + fmt("%.4f", lrt.p_value)) +
         (lrt.clamped ? " [negative deviance clamped]" : "") + "\n\n";
  out += "Interaction terms (correction: ";
  out += to_string(options.correction);
  out += ", alpha = " + fmt("%g", options.alpha) + ")\n";
  char line[160];
  std::snprintf(line, sizeof line, "  %-12s %11s %10s %8s %8s %10s %10s\n", "step", "estimate", "se", "t", "df",
                "p_raw", "p_adj");
  out += line;
  for (const auto& r : interactions) {
    std::snprintf(line, sizeof line, "  %-12llu %11.5f %10.5f %8.3f %8.0f %10s %10s%s\n",
                  static_cast<unsigned long long>(r.step), r.wald.estimate, r.wald.se, r.wald.t, r.wald.df,
                  p_text(r.wald.p_value).c_str(), p_text(r.p_adjusted).c_str(), r.significant ? " *" : "");
    out += line;
  }
  out += "\nEarliest significant step: ";
  out += earliest_significant ? std::to_string(*earliest_significant) : std::string("none");
  out += '\n';
  return out;
}

std::vector<StepSummary> summarize_by_step(std::span<const PrimingMeasurement> rows) {
  std::map<std::uint64_t, std::map<std::int64_t, std::pair<const PrimingMeasurement*, const PrimingMeasurement*>>> by;
  for (const auto& m : rows) {
    auto& slot = by[m.step][m.item_id];
    (m.prime_type == PrimeType::po ? slot.first : slot.second) = &m;
  }
  std::vector<StepSummary> out;
  for (const auto& [step, items] : by) {
    StepSummary s;
    s.step = step;
    for (const auto& [id, pair] : items) {
      if (pair.first == nullptr || pair.second == nullptr) continue;
      ++s.items;
      s.mean_after_po += pair.first->p_n_po_target;
      s.mean_after_do += pair.second->p_n_po_target;
    }
    if (s.items == 0) continue;
    const auto k = static_cast<double>(s.items);
    s.mean_after_po /= k;
    s.mean_after_do /= k;
    s.mean_effect = s.mean_after_po - s.mean_after_do;
    out.push_back(s);
  }
  return out;
}

}  // namespace xlp
