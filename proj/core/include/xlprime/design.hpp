#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xlprime/scoring.hpp"

namespace xlp {

enum class Response { probability, logit };

/// Normalized PO-target probability ~ prime type * step (categorical) + (1 | item).
struct LmmSpec {
  std::uint64_t baseline_step = 0;
  bool include_interaction = true;
  Response response = Response::probability;
};

/// Treatment coding with baseline (DO prime, baseline step). Column order:
/// (Intercept), prime_PO, step_<s> for each non-baseline step ascending, then
/// prime_PO:step_<s> in the same step order.
struct DesignMatrix {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<int> groups;  ///< 0-based item index per row
  int n_groups = 0;
  std::vector<std::string> column_names;
  std::vector<std::uint64_t> steps;  ///< non-baseline steps in column order

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

std::string step_column(std::uint64_t step);
std::string interaction_column(std::uint64_t step);

DesignMatrix build_design(std::span<const PrimingMeasurement> rows, const LmmSpec& spec);

/// Assembles a design from raw parts, checking alignment and full column rank.
DesignMatrix make_design(Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<int> groups,
                         std::vector<std::string> column_names);

}  // namespace xlp
