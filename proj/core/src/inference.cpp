#include "xlprime/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "xlprime/error.hpp"

namespace xlp {

double chi2_sf(double x, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) throw ConfigError("chi2_sf: degrees of freedom must be positive");
  if (std::isnan(x)) throw NumericError("chi2_sf: NaN statistic");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double t_sf(double x, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) throw ConfigError("t_sf: degrees of freedom must be positive");
  if (std::isnan(x)) throw NumericError("t_sf: NaN statistic");
  if (x == 0.0) return 0.5;
  if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
  // P(|T| > |x|) = I_{df/(df+x^2)}(df/2, 1/2).
  const double tail = 0.5 * boost::math::ibeta(0.5 * df, 0.5, df / (df + x * x));
  return x > 0 ? tail : 1.0 - tail;
}

LrtResult lrt(const LmmFit& full, const LmmFit& reduced) {
  if (full.n != reduced.n || full.groups != reduced.groups) {
    throw ConfigError("lrt: models were fit to different rows or groupings");
  }
  if (reduced.p >= full.p) throw ConfigError("lrt: the reduced model must have fewer fixed effects");
  for (const auto& name : reduced.column_names) {
    if (std::find(full.column_names.begin(), full.column_names.end(), name) == full.column_names.end()) {
      throw ConfigError("lrt: models are not nested ('" + name + "' is missing from the full model)");
    }
  }
  LrtResult r;
  r.df = static_cast<int>(full.p - reduced.p);
  r.statistic = 2.0 * (full.loglik - reduced.loglik);
  if (r.statistic < 0.0) {
    r.statistic = 0.0;
    r.clamped = true;
  }
  r.p_value = chi2_sf(r.statistic, r.df);
  return r;
}

WaldResult wald_t(const LmmFit& fit, std::string_view term) {
  const auto it = std::find(fit.column_names.begin(), fit.column_names.end(), term);
  if (it == fit.column_names.end()) throw ConfigError("unknown coefficient '" + std::string(term) + "'");
  const auto k = static_cast<Eigen::Index>(it - fit.column_names.begin());
  WaldResult w;
  w.term = std::string(term);
  w.estimate = fit.beta(k);
  w.se = std::sqrt(fit.beta_cov(k, k));
  w.df = static_cast<double>(fit.n - fit.p);
  w.t = w.estimate == 0.0 ? 0.0 : w.estimate / w.se;
  w.p_value = std::min(1.0, 2.0 * t_sf(std::abs(w.t), w.df));
  return w;
}

const char* to_string(PAdjust method) noexcept {
  switch (method) {
    case PAdjust::holm: return "holm";
    case PAdjust::bonferroni: return "bonferroni";
    case PAdjust::bh: return "bh";
  }
  return "?";
}

PAdjust parse_padjust(std::string_view text) {
  if (text == "holm") return PAdjust::holm;
  if (text == "bonferroni") return PAdjust::bonferroni;
  if (text == "bh" || text == "fdr") return PAdjust::bh;
  throw ConfigError("unknown correction '" + std::string(text) + "' (holm, bonferroni, bh)");
}

std::vector<double> adjust_pvalues(std::span<const double> p, PAdjust method) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("p-values must lie in [0, 1]");
  }
  const std::size_t m = p.size();
  std::vector<double> out(m);
  if (m == 0) return out;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  const auto md = static_cast<double>(m);
  switch (method) {
    case PAdjust::bonferroni:
      for (std::size_t i = 0; i < m; ++i) out[i] = std::min(1.0, md * p[i]);
      break;
    case PAdjust::holm: {
      double running = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p[order[k]]));
        out[order[k]] = running;
      }
      break;
    }
    case PAdjust::bh: {
      double running = 1.0;
      for (std::size_t k = m; k-- > 0;) {
        running = std::min(running, md / static_cast<double>(k + 1) * p[order[k]]);
        out[order[k]] = running;
      }
      break;
    }
  }
  return out;
}

}  // namespace xlp
