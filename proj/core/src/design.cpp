#include "xlprime/design.hpp"

#include <cmath>
#include <map>
#include <set>

#include <Eigen/QR>

#include "xlprime/error.hpp"

namespace xlp {

std::string step_column(std::uint64_t step) { return "step_" + std::to_string(step); }
std::string interaction_column(std::uint64_t step) { return "prime_PO:step_" + std::to_string(step); }

DesignMatrix make_design(Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<int> groups,
                         std::vector<std::string> column_names) {
  const auto n = x.rows();
  if (y.size() != n || static_cast<Eigen::Index>(groups.size()) != n) {
    throw DataError("design: response, fixed effects and grouping have different row counts");
  }
  if (static_cast<Eigen::Index>(column_names.size()) != x.cols()) {
    throw DataError("design: column names do not match the fixed-effects matrix");
  }
  if (n <= x.cols()) {
    throw DataError("design: need more rows (" + std::to_string(n) + ") than fixed effects (" +
                    std::to_string(x.cols()) + ")");
  }
  if (!y.allFinite() || !x.allFinite()) throw NumericError("design: non-finite values");
  int max_group = -1;
  for (int gid : groups) {
    if (gid < 0) throw DataError("design: negative group index");
    max_group = std::max(max_group, gid);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw DataError("design: fixed effects are rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(x.cols()) + "); is every step observed with both prime types?");
  }
  DesignMatrix d;
  d.y = std::move(y);
  d.x = std::move(x);
  d.groups = std::move(groups);
  d.n_groups = max_group + 1;
  d.column_names = std::move(column_names);
  return d;
}

DesignMatrix build_design(std::span<const PrimingMeasurement> rows, const LmmSpec& spec) {
  std::set<std::uint64_t> steps;
  std::set<std::int64_t> items;
  std::set<PrimeType> primes;
  for (const auto& m : rows) {
    steps.insert(m.step);
    items.insert(m.item_id);
    primes.insert(m.prime_type);
  }
  if (steps.size() < 2) {
    throw ConfigError("analysis needs at least two checkpoint steps (found " + std::to_string(steps.size()) +
                      "); step contrasts are undefined");
  }
  if (!steps.count(spec.baseline_step)) {
    throw ConfigError("baseline step " + std::to_string(spec.baseline_step) + " is not present in the sweep");
  }
  if (primes.size() != 2) throw DataError("analysis needs both prime types");
  if (items.size() < 2) throw DataError("analysis needs at least two items for a random intercept");

  std::vector<std::uint64_t> others;
  for (auto s : steps) {
    if (s != spec.baseline_step) others.push_back(s);
  }
  std::map<std::uint64_t, Eigen::Index> step_index;
  for (std::size_t k = 0; k < others.size(); ++k) step_index[others[k]] = static_cast<Eigen::Index>(k);
  std::map<std::int64_t, int> item_index;
  for (auto id : items) item_index.emplace(id, static_cast<int>(item_index.size()));

  const auto s = static_cast<Eigen::Index>(others.size());
  const Eigen::Index p = 2 + s + (spec.include_interaction ? s : 0);
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
  Eigen::VectorXd y(n);
  std::vector<int> groups(rows.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& m = rows[static_cast<std::size_t>(r)];
    double v = m.p_n_po_target;
    if (spec.response == Response::logit) {
      if (!(v > 0.0 && v < 1.0)) throw NumericError("logit response needs probabilities strictly inside (0, 1)");
      v = std::log(v) - std::log1p(-v);
    }
    y(r) = v;
    groups[static_cast<std::size_t>(r)] = item_index.at(m.item_id);
    const double po = m.prime_type == PrimeType::po ? 1.0 : 0.0;
    x(r, 0) = 1.0;
    x(r, 1) = po;
    if (m.step != spec.baseline_step) {
      const Eigen::Index k = step_index.at(m.step);
      x(r, 2 + k) = 1.0;
      if (spec.include_interaction) x(r, 2 + s + k) = po;
    }
  }
  std::vector<std::string> names{"(Intercept)", "prime_PO"};
  for (auto st : others) names.push_back(step_column(st));
  if (spec.include_interaction) {
    for (auto st : others) names.push_back(interaction_column(st));
  }
  auto d = make_design(std::move(y), std::move(x), std::move(groups), std::move(names));
  d.steps = std::move(others);
  return d;
}

}  // namespace xlp
