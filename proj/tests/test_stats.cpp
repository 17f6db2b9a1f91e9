#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "xlprime/analysis.hpp"
#include "xlprime/design.hpp"
#include "xlprime/error.hpp"
#include "xlprime/inference.hpp"
#include "xlprime/lmm.hpp"
#include "xlprime/rng.hpp"

using namespace xlp;

namespace {

// ---- Brute-force oracle: dense n x n covariance, no group algebra. ----

struct DenseEval {
  double loglik;
  Eigen::VectorXd beta;
};

DenseEval dense_loglik(const DesignMatrix& d, double lambda) {
  const auto n = d.n();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (d.groups[static_cast<std::size_t>(i)] == d.groups[static_cast<std::size_t>(j)]) v(i, j) += lambda;
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(v);
  const Eigen::MatrixXd vinv_x = llt.solve(d.x);
  const Eigen::VectorXd vinv_y = llt.solve(d.y);
  DenseEval e;
  e.beta = (d.x.transpose() * vinv_x).ldlt().solve(d.x.transpose() * vinv_y);
  const Eigen::VectorXd r = d.y - d.x * e.beta;
  const double q = r.dot(llt.solve(r));
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double nn = static_cast<double>(n);
  e.loglik = -0.5 * nn * (std::log(2 * std::numbers::pi * q / nn) + 1.0) - 0.5 * logdet;
  return e;
}

// Best of `points` equally spaced log-lambda values on [lo, hi].
std::pair<double, DenseEval> grid_search(const DesignMatrix& d, double lo, double hi, int points) {
  double best_x = lo;
  DenseEval best{-INFINITY, {}};
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    auto e = dense_loglik(d, std::exp(x));
    if (e.loglik > best.loglik) {
      best = e;
      best_x = x;
    }
  }
  return {best_x, best};
}

// n = 50 rows in g = 10 groups of 5: intercept, a continuous covariate and a binary one.
DesignMatrix synthetic_dataset(std::uint64_t seed, double sigma2, double tau2) {
  Rng rng(seed);
  const int g = 10, m = 5, n = g * m;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  std::vector<int> groups(n);
  const Eigen::Vector3d beta(1.0, -0.5, 2.0);
  for (int j = 0; j < g; ++j) {
    const double u = std::sqrt(tau2) * rng.normal();
    for (int k = 0; k < m; ++k) {
      const int r = j * m + k;
      x(r, 0) = 1.0;
      x(r, 1) = rng.normal();
      x(r, 2) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      groups[static_cast<std::size_t>(r)] = j;
      y(r) = x.row(r).dot(beta) + u + std::sqrt(sigma2) * rng.normal();
    }
  }
  return make_design(y, x, groups, {"(Intercept)", "x", "b"});
}

// Balanced design whose ML variance ratio is exactly zero: covariates and residuals are
// centered within groups, so the between-group residual vanishes for every lambda.
DesignMatrix zero_tau_dataset(std::uint64_t seed) {
  Rng rng(seed);
  const int g = 10, m = 5, n = g * m;
  Eigen::MatrixXd x(n, 3);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, g);
  std::vector<int> groups(n);
  for (int r = 0; r < n; ++r) {
    groups[static_cast<std::size_t>(r)] = r / m;
    z(r, r / m) = 1.0;
    x(r, 0) = 1.0;
    x(r, 1) = rng.normal();
    x(r, 2) = rng.normal();
  }
  for (int j = 0; j < g; ++j) {
    for (int c = 1; c < 3; ++c) {
      const double mean = x.block(j * m, c, m, 1).mean();
      x.block(j * m, c, m, 1).array() -= mean;
    }
  }
  Eigen::VectorXd e(n);
  for (int r = 0; r < n; ++r) e(r) = rng.normal();
  Eigen::MatrixXd xz(n, 3 + g);
  xz << x, z;
  const Eigen::VectorXd resid = e - xz * xz.completeOrthogonalDecomposition().solve(e);
  const Eigen::VectorXd y = x * Eigen::Vector3d(0.3, 1.5, -0.7) + resid;
  return make_design(y, x, groups, {"(Intercept)", "x1", "x2"});
}

std::vector<PrimingMeasurement> sweep_rows(int steps, int items, std::uint64_t baseline, std::uint64_t seed,
                                           double effect_step_delta = 0.0, int effect_step_index = -1) {
  Rng rng(seed);
  std::vector<double> item_shift(static_cast<std::size_t>(items));
  for (auto& s : item_shift) s = 0.05 * rng.normal();
  std::vector<PrimingMeasurement> rows;
  for (int s = 0; s < steps; ++s) {
    for (int i = 0; i < items; ++i) {
      for (int k = 0; k < 2; ++k) {
        PrimingMeasurement m;
        m.step = baseline + 10 * static_cast<std::uint64_t>(s);
        m.item_id = 100 + i;
        m.prime_type = k == 0 ? PrimeType::po : PrimeType::do_;
        double v = 0.5 + item_shift[static_cast<std::size_t>(i)] + 0.02 * s + 0.03 * rng.normal();
        if (k == 0) v += 0.01;
        if (k == 0 && s == effect_step_index) v += effect_step_delta;
        m.p_n_po_target = v;
        rows.push_back(m);
      }
    }
  }
  return rows;
}

double t_density(double t, double df) {
  const double c = std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi);
  return std::exp(c - 0.5 * (df + 1) * std::log1p(t * t / df));
}

// Composite Simpson on [a, b].
template <typename F>
double simpson(F f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

// P(T > x) = 1/2 - integral_0^x density.
double t_sf_quadrature(double x, double df) { return 0.5 - simpson([df](double t) { return t_density(t, df); }, 0, x, 20000); }

// Upper chi-square tail via t = u^2, which removes the density's singularity at 0 for df = 1.
double chi2_sf_quadrature(double x, double df) {
  const double c = -0.5 * df * std::log(2.0) - std::lgamma(0.5 * df);
  auto f = [&](double u) { return u == 0 ? (df == 1 ? 2 * std::exp(c) : 0.0) : 2 * std::exp(c + (df - 1) * std::log(u) - 0.5 * u * u); };
  return 1.0 - simpson(f, 0, std::sqrt(x), 20000);
}

}  // namespace

// ---- Design matrix ----

TEST(Design, TwentyOneStepsGiveTwentyInteractions) {
  const auto rows = sweep_rows(21, 4, 500'000, 1);
  LmmSpec spec;
  spec.baseline_step = 500'000;
  const auto d = build_design(rows, spec);
  EXPECT_EQ(d.p(), 42);
  const auto interactions = std::count_if(d.column_names.begin(), d.column_names.end(),
                                          [](const std::string& c) { return c.rfind("prime_PO:step_", 0) == 0; });
  EXPECT_EQ(interactions, 20);
  EXPECT_EQ(d.column_names[0], "(Intercept)");
  EXPECT_EQ(d.column_names[1], "prime_PO");
  EXPECT_EQ(d.column_names[2], "step_500010");
  EXPECT_EQ(d.column_names[22], "prime_PO:step_500010");
  EXPECT_EQ(d.column_names.back(), "prime_PO:step_500200");
}

TEST(Design, TwoByTwoFactorial) {
  const auto rows = sweep_rows(2, 5, 7, 2);
  LmmSpec spec;
  spec.baseline_step = 7;
  const auto d = build_design(rows, spec);
  EXPECT_EQ(d.p(), 4);
  // Baseline cell (DO prime at the baseline step) has only the intercept switched on.
  EXPECT_EQ(d.x.row(1).sum(), 1.0);
  EXPECT_EQ(d.x.row(rows.size() - 2).sum(), 4.0);
}

TEST(Design, ErrorPaths) {
  LmmSpec spec;
  spec.baseline_step = 500'000;
  EXPECT_THROW(build_design(sweep_rows(1, 4, 500'000, 3), spec), ConfigError);
  spec.baseline_step = 42;
  EXPECT_THROW(build_design(sweep_rows(3, 4, 500'000, 3), spec), ConfigError);
  spec.baseline_step = 500'000;
  auto rows = sweep_rows(3, 4, 500'000, 3);
  std::erase_if(rows, [](const PrimingMeasurement& m) { return m.step == 500'020 && m.prime_type == PrimeType::do_; });
  EXPECT_THROW(build_design(rows, spec), DataError);
  spec.response = Response::logit;
  auto bad = sweep_rows(2, 4, 500'000, 3);
  bad[0].p_n_po_target = 1.0;
  EXPECT_THROW(build_design(bad, spec), NumericError);
}

// ---- Mixed model ----

TEST(Lmm, ProfileMatchesDenseLikelihood) {
  const auto d = synthetic_dataset(1, 1.0, 2.0);
  for (double lambda : {0.0, 1e-3, 0.5, 2.0, 40.0}) {
    EXPECT_NEAR(profile_loglik(d, lambda), dense_loglik(d, lambda).loglik, 1e-9);
  }
}

TEST(Lmm, AgreesWithBruteForceGridOnTenDatasets) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto d = synthetic_dataset(seed, 1.0, 2.0);
    const auto fit = fit_lmm(d);
    const auto [x0, coarse] = grid_search(d, -12, 12, 1000);
    EXPECT_NEAR(fit.loglik, coarse.loglik, 1e-3) << "seed " << seed;
    EXPECT_GE(fit.loglik, coarse.loglik - 1e-6) << "seed " << seed;
    // A zoomed grid pins the optimum closely enough to compare coefficients.
    const double h = 24.0 / 999;
    const auto [x1, fine] = grid_search(d, x0 - h, x0 + h, 1000);
    EXPECT_LT((fit.beta - fine.beta).cwiseAbs().maxCoeff(), 1e-4) << "seed " << seed;
    EXPECT_GT(fit.sigma2, 0.0);
    EXPECT_GE(fit.tau2, 0.0);
    EXPECT_TRUE(fit.beta_cov.isApprox(fit.beta_cov.transpose()));
    EXPECT_GT(fit.beta_cov.ldlt().vectorD().minCoeff(), 0.0);
  }
}

TEST(Lmm, ZeroVarianceReducesToOls) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto d = zero_tau_dataset(seed);
    const auto fit = fit_lmm(d);
    const Eigen::VectorXd ols = d.x.colPivHouseholderQr().solve(d.y);
    EXPECT_LE(fit.tau2, 1e-6);
    EXPECT_LT((fit.beta - ols).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(fit.sigma2, (d.y - d.x * ols).squaredNorm() / static_cast<double>(d.n()), 1e-12);
  }
}

TEST(Lmm, ReplicatingWithFreshItemsKeepsBeta) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = synthetic_dataset(seed, 1.0, 2.0);
    const auto n = d.n();
    Eigen::MatrixXd x2(2 * n, d.p());
    x2 << d.x, d.x;
    Eigen::VectorXd y2(2 * n);
    y2 << d.y, d.y;
    auto g2 = d.groups;
    for (int gid : d.groups) g2.push_back(gid + d.n_groups);
    const auto doubled = make_design(y2, x2, g2, d.column_names);
    const auto a = fit_lmm(d);
    const auto b = fit_lmm(doubled);
    EXPECT_LT((a.beta - b.beta).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(b.loglik, 2 * a.loglik, 1e-6);
  }
}

TEST(Lmm, RejectsDegenerateDesigns) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, 1, 1, 1, 1, 1, 1;
  EXPECT_THROW(make_design(Eigen::VectorXd::Ones(4), x, {0, 0, 1, 1}, {"a", "b"}), DataError);
  Eigen::MatrixXd x3(2, 2);
  x3 << 1, 0, 0, 1;
  EXPECT_THROW(make_design(Eigen::VectorXd::Ones(2), x3, {0, 1}, {"a", "b"}), DataError);  // n <= p
}

TEST(Lmm, InteractionRecovery) {
  const double delta = 0.05;
  int covered = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const auto rows = sweep_rows(5, 16, 1000, 1000 + rep, delta, 3);
    LmmSpec spec;
    spec.baseline_step = 1000;
    const auto fit = fit_lmm(build_design(rows, spec));
    const auto w = wald_t(fit, interaction_column(1030));
    covered += std::abs(w.estimate - delta) <= 3 * w.se;
  }
  EXPECT_GE(covered, 95);
}

// ---- Tests and tails ----

TEST(Lrt, IdenticalModelsAndNesting) {
  const auto d = synthetic_dataset(4, 1.0, 2.0);
  const auto fit = fit_lmm(d);
  EXPECT_THROW(lrt(fit, fit), ConfigError);
  const auto reduced = make_design(d.y, d.x.leftCols(2), d.groups, {"(Intercept)", "x"});
  const auto r = lrt(fit, fit_lmm(reduced));
  EXPECT_EQ(r.df, 1);
  EXPECT_GE(r.statistic, 0.0);
  EXPECT_GE(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
  const auto other = make_design(d.y, d.x.leftCols(2), d.groups, {"(Intercept)", "z"});
  EXPECT_THROW(lrt(fit, fit_lmm(other)), ConfigError);
}

TEST(Lrt, EqualLikelihoodGivesUnitP) {
  // Equal log-likelihoods give a zero statistic whatever the df.
  const auto d = zero_tau_dataset(2);
  const auto full = fit_lmm(d);
  LmmFit reduced = full;
  reduced.p = full.p - 1;
  reduced.column_names.pop_back();
  const auto r = lrt(full, reduced);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(Lrt, InvariantToAffineRescaling) {
  const auto rows = sweep_rows(4, 12, 10, 9, 0.04, 2);
  LmmSpec spec;
  spec.baseline_step = 10;
  const auto full = build_design(rows, spec);
  spec.include_interaction = false;
  const auto reduced = build_design(rows, spec);
  const auto base = lrt(fit_lmm(full), fit_lmm(reduced));
  auto rescale = [](const DesignMatrix& d) {
    return make_design((3.5 * d.y.array() - 1.25).matrix(), d.x, d.groups, d.column_names);
  };
  const auto scaled = lrt(fit_lmm(rescale(full)), fit_lmm(rescale(reduced)));
  EXPECT_NEAR(scaled.statistic, base.statistic, 1e-6);
}

TEST(Tails, ChiSquareAnchors) {
  EXPECT_EQ(chi2_sf(0.0, 3), 1.0);
  EXPECT_LT(chi2_sf(56.86, 20), 0.001);
  EXPECT_NEAR(chi2_sf(3.841, 1), 0.050, 0.001);
  EXPECT_NEAR(chi2_sf(3.841, 1), chi2_sf_quadrature(3.841, 1), 1e-6);
  EXPECT_NEAR(chi2_sf(56.86, 20), chi2_sf_quadrature(56.86, 20), 1e-6);
  EXPECT_THROW(chi2_sf(1.0, 0.0), ConfigError);
}

TEST(Tails, StudentTAgainstQuadrature) {
  Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    const double x = 6.0 * rng.uniform01();
    const double df = 1.0 + std::floor(std::exp(rng.uniform01() * std::log(10000.0)));
    EXPECT_NEAR(t_sf(x, df), t_sf_quadrature(x, df), 1e-6) << "x " << x << " df " << df;
    EXPECT_NEAR(t_sf(-x, df), 1.0 - t_sf(x, df), 1e-15);
  }
}

TEST(Tails, StudentTAnchors) {
  EXPECT_EQ(t_sf(0.0, 5), 0.5);
  EXPECT_NEAR(2 * t_sf(2.93, 3943), 0.0034, 0.0002);
  EXPECT_NEAR(2 * t_sf(1.96, 1e7), 0.050, 0.001);
}

TEST(Wald, ZeroEstimate) {
  LmmFit fit;
  fit.beta = Eigen::Vector2d(0.0, 1.0);
  fit.beta_cov = Eigen::Matrix2d::Identity();
  fit.column_names = {"a", "b"};
  fit.n = 20;
  fit.p = 2;
  const auto w = wald_t(fit, "a");
  EXPECT_EQ(w.t, 0.0);
  EXPECT_EQ(w.p_value, 1.0);
  EXPECT_EQ(w.df, 18.0);
  EXPECT_THROW(wald_t(fit, "c"), ConfigError);
}

// ---- Multiple comparisons ----

TEST(Adjust, HolmAnchor) {
  const std::vector<double> p{0.001, 0.01, 0.04};
  EXPECT_EQ(adjust_pvalues(p, PAdjust::holm), (std::vector<double>{0.003, 0.02, 0.04}));
}

TEST(Adjust, SingleComparisonIsIdentity) {
  for (auto m : {PAdjust::holm, PAdjust::bonferroni, PAdjust::bh}) {
    EXPECT_EQ(adjust_pvalues(std::vector<double>{0.01}, m), std::vector<double>{0.01});
  }
}

TEST(Adjust, KnownValuesInInputOrder) {
  const std::vector<double> p{0.04, 0.01, 0.03, 0.02, 0.05};
  const auto bh = adjust_pvalues(p, PAdjust::bh);
  for (double v : bh) EXPECT_NEAR(v, 0.05, 1e-15);
  const auto holm = adjust_pvalues(p, PAdjust::holm);
  EXPECT_NEAR(holm[1], 0.05, 1e-15);  // 5 * 0.01
  EXPECT_NEAR(holm[3], 0.08, 1e-15);  // 4 * 0.02
  EXPECT_NEAR(holm[2], 0.09, 1e-15);  // 3 * 0.03
  EXPECT_NEAR(holm[0], 0.09, 1e-15);  // max(2 * 0.04, 0.09)
  EXPECT_NEAR(holm[4], 0.09, 1e-15);  // max(1 * 0.05, 0.09)
  EXPECT_NEAR(adjust_pvalues(p, PAdjust::bonferroni)[0], 0.2, 1e-15);
}

TEST(Adjust, DominanceAndMonotonicity) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(1 + rng.uniform_below(30));
    for (auto& v : p) v = rng.bernoulli(0.3) ? 0.01 * rng.uniform01() : rng.uniform01();
    for (auto m : {PAdjust::holm, PAdjust::bonferroni, PAdjust::bh}) {
      const auto adj = adjust_pvalues(p, m);
      std::vector<std::size_t> order(p.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
      for (std::size_t i = 0; i < p.size(); ++i) {
        ASSERT_GE(adj[i], p[i]);
        ASSERT_LE(adj[i], 1.0);
        if (i > 0) ASSERT_LE(adj[order[i - 1]], adj[order[i]]);
      }
    }
  }
}

TEST(Adjust, RejectsInvalidInput) {
  EXPECT_THROW(adjust_pvalues(std::vector<double>{0.2, 1.5}, PAdjust::holm), DataError);
  EXPECT_THROW(adjust_pvalues(std::vector<double>{NAN}, PAdjust::bh), DataError);
}

// ---- Report ----

TEST(Analysis, FindsAPlantedInteraction) {
  const auto rows = sweep_rows(6, 24, 2000, 17, 0.08, 4);
  AnalysisOptions opt;
  opt.baseline_step = 2000;
  const auto report = analyze(rows, opt);
  EXPECT_EQ(report.lrt.df, 5);
  EXPECT_LT(report.lrt.p_value, 0.001);
  ASSERT_TRUE(report.earliest_significant.has_value());
  EXPECT_EQ(*report.earliest_significant, 2040u);
  EXPECT_NE(report.to_text().find("Earliest significant step: 2040"), std::string::npos);
  const auto csv = report.coefficients_csv();
  EXPECT_EQ(csv.substr(0, 36), "term,estimate,se,t,df,p_raw,p_adjust");
  EXPECT_NE(csv.find("prime_PO,"), std::string::npos);
  EXPECT_NE(csv.find(",NA\n"), std::string::npos);
}

TEST(Analysis, StepSummaries) {
  const auto rows = sweep_rows(3, 4, 0, 3);
  const auto s = summarize_by_step(rows);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1].step, 10u);
  EXPECT_EQ(s[1].items, 4u);
  EXPECT_NEAR(s[1].mean_effect, s[1].mean_after_po - s[1].mean_after_do, 1e-15);
}
