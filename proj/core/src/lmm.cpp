#include "xlprime/lmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <boost/math/tools/minima.hpp>

#include "xlprime/error.hpp"

namespace xlp {

namespace {

// Sufficient statistics for the per-group Woodbury identity:
//   V^-1 = (1/sigma2) (I - sum_j c_j 1_j 1_j^T),  c_j = lambda / (1 + lambda n_j),
// so X^T V^-1 X and friends only need group sums of X's rows.
class Profile {
 public:
  explicit Profile(const DesignMatrix& d) : d_(d) {
    const auto g = static_cast<Eigen::Index>(d.n_groups);
    xtx_ = d.x.transpose() * d.x;
    xty_ = d.x.transpose() * d.y;
    sx_ = Eigen::MatrixXd::Zero(g, d.p());
    sy_ = Eigen::VectorXd::Zero(g);
    counts_ = Eigen::VectorXd::Zero(g);
    for (Eigen::Index r = 0; r < d.n(); ++r) {
      const auto j = d.groups[static_cast<std::size_t>(r)];
      sx_.row(j) += d.x.row(r);
      sy_(j) += d.y(r);
      counts_(j) += 1.0;
    }
  }

  struct Eval {
    double loglik;
    Eigen::VectorXd beta;
    Eigen::MatrixXd a;  // X^T (I - sum c_j 1 1^T) X
    double sigma2;
  };

  Eval evaluate(double lambda) const {
    const auto g = sy_.size();
    Eigen::VectorXd c(g);
    double logdet = 0.0;
    for (Eigen::Index j = 0; j < g; ++j) {
      c(j) = lambda / (1.0 + lambda * counts_(j));
      logdet += std::log1p(lambda * counts_(j));
    }
    Eval e;
    e.a = xtx_ - sx_.transpose() * c.asDiagonal() * sx_;
    const Eigen::VectorXd b = xty_ - sx_.transpose() * c.cwiseProduct(sy_);
    Eigen::LLT<Eigen::MatrixXd> llt(e.a);
    if (llt.info() != Eigen::Success) throw NumericError("lmm: fixed-effects system is not positive definite");
    e.beta = llt.solve(b);
    // Residual quadratic form from residuals directly (no cancellation against y^T y).
    const Eigen::VectorXd resid = d_.y - d_.x * e.beta;
    Eigen::VectorXd rs = Eigen::VectorXd::Zero(g);
    for (Eigen::Index r = 0; r < d_.n(); ++r) rs(d_.groups[static_cast<std::size_t>(r)]) += resid(r);
    const double q = resid.squaredNorm() - (c.array() * rs.array().square()).sum();
    const auto n = static_cast<double>(d_.n());
    e.sigma2 = q / n;
    if (!(e.sigma2 > 0.0) || !std::isfinite(e.sigma2)) {
      throw NumericError("lmm: residual variance is not positive (perfect fit?)");
    }
    e.loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi) + std::log(e.sigma2) + 1.0) - 0.5 * logdet;
    return e;
  }

 private:
  const DesignMatrix& d_;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  Eigen::MatrixXd sx_;
  Eigen::VectorXd sy_;
  Eigen::VectorXd counts_;
};

}  // namespace

double profile_loglik(const DesignMatrix& design, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  return Profile(design).evaluate(lambda).loglik;
}

LmmFit fit_lmm(const DesignMatrix& design, const LmmOptions& options) {
  if (design.n() <= design.p()) throw DataError("lmm: need n > p");
  if (options.grid_points < 2 || !(options.log_lambda_min < options.log_lambda_max)) {
    throw ConfigError("lmm: invalid search range");
  }
  const Profile profile(design);
  auto objective = [&](double log_lambda) { return -profile.evaluate(std::exp(log_lambda)).loglik; };

  // Coarse scan, then a bracketed Brent refinement around the best grid point.
  const double lo = options.log_lambda_min;
  const double hi = options.log_lambda_max;
  const double h = (hi - lo) / (options.grid_points - 1);
  int best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < options.grid_points; ++k) {
    const double v = objective(lo + k * h);
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  const double a = std::max(lo, lo + (best_k - 1) * h);
  const double b = std::min(hi, lo + (best_k + 1) * h);
  boost::uintmax_t iters = static_cast<boost::uintmax_t>(options.max_iterations);
  const auto [x_min, f_min] =
      boost::math::tools::brent_find_minima(objective, a, b, std::numeric_limits<double>::digits / 2, iters);

  LmmFit fit;
  fit.iterations = static_cast<int>(iters) + options.grid_points;
  fit.converged = iters < static_cast<boost::uintmax_t>(options.max_iterations);
  double lambda = std::exp(x_min);
  double loglik = -f_min;
  if (-best > loglik) {
    lambda = std::exp(lo + best_k * h);
    loglik = -best;
  }
  // Boundary candidate: tau2 = 0 exactly.
  const double at_zero = profile.evaluate(0.0).loglik;
  if (at_zero >= loglik) lambda = 0.0;

  const auto e = profile.evaluate(lambda);
  fit.beta = e.beta;
  fit.sigma2 = e.sigma2;
  fit.lambda = lambda;
  fit.tau2 = lambda * e.sigma2;
  fit.loglik = e.loglik;
  const Eigen::MatrixXd ainv = e.a.llt().solve(Eigen::MatrixXd::Identity(design.p(), design.p()));
  fit.beta_cov = e.sigma2 * 0.5 * (ainv + ainv.transpose());
  fit.n = static_cast<std::size_t>(design.n());
  fit.p = static_cast<std::size_t>(design.p());
  fit.g = static_cast<std::size_t>(design.n_groups);
  fit.column_names = design.column_names;
  fit.groups = design.groups;
  if (!std::isfinite(fit.loglik)) throw NumericError("lmm: non-finite log-likelihood");
  if (!fit.converged) {
    throw NumericError("lmm: search did not converge in " + std::to_string(options.max_iterations) +
                       " iterations (best log-likelihood " + std::to_string(fit.loglik) + " at lambda " +
                       std::to_string(fit.lambda) + ")");
  }
  return fit;
}

}  // namespace xlp
