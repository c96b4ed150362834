#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lorf/dataset.hpp"
#include "lorf/forest.hpp"

namespace lorf {

/// How each missing column is filled. Processing order is a seeded uniform
/// permutation of the columns that have missing cells.
struct ImputationPlan {
  ForestControls controls;  // per-column quantile forest; seed is overridden
  std::uint64_t seed = 0;
  /// Also use columns imputed earlier in the order as predictors
  /// (chained-equations style). Off by default: only originally complete
  /// columns are predictors.
  bool use_imputed_columns = false;

  static ImputationPlan defaults(std::uint64_t seed);
};

struct ImputedColumn {
  std::size_t column = 0;
  std::string name;
  std::size_t missing = 0;
  std::size_t order = 0;  // position in the processing order
};

struct ImputationReport {
  std::vector<std::size_t> predictor_columns;
  std::vector<ImputedColumn> columns;  // in processing order
};

/// Columns with at least one missing cell, ascending.
std::vector<std::size_t> missing_columns(const Dataset& data);

/// Seeded processing order over missing_columns(data).
std::vector<std::size_t> imputation_order(const Dataset& data, std::uint64_t seed);

/// Fills every missing cell with a draw from the estimated conditional
/// distribution: for column j, a quantile forest is fit on the rows where j
/// is observed and each missing cell receives the forest's U-quantile at
/// that row, U ~ Uniform(0, 1). Observed cells are never modified.
Dataset impute(const Dataset& data, const ImputationPlan& plan,
               ImputationReport* report = nullptr);

/// Baseline that fills with the forest's conditional mean instead of a
/// quantile draw. Same plan, same forests.
Dataset impute_conditional_mean(const Dataset& data, const ImputationPlan& plan);

}  // namespace lorf
