#include "lorf/imputation.hpp"

#include <algorithm>

#include "lorf/error.hpp"
#include "lorf/rng.hpp"

namespace lorf {

namespace {

enum class Fill { kQuantileDraw, kConditionalMean };

Dataset run_imputation(const Dataset& data, const ImputationPlan& plan, Fill fill,
                       ImputationReport* report) {
  data.validate();
  const auto order = imputation_order(data, plan.seed);
  if (report) *report = {};
  if (order.empty()) return data;

  std::vector<std::size_t> predictors;
  for (std::size_t j = 0; j < data.p(); ++j)
    if (data.missing_count(j) == 0) predictors.push_back(j);
  if (predictors.empty())
    throw ConfigError("imputation needs at least one fully observed column");
  if (report) report->predictor_columns = predictors;

  Dataset out = data;
  for (std::size_t step = 0; step < order.size(); ++step) {
    const std::size_t col = order[step];
    std::vector<std::size_t> observed;
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < data.n(); ++i) (data.is_missing(i, col) ? missing : observed).push_back(i);
    if (observed.empty())
      throw DomainError("column '" + data.feature_names[col] + "' has no observed values");

    auto controls = plan.controls;
    controls.seed = derive_seed(plan.seed, Stream::kImputeColumn, col);
    if (observed.size() < 2 * controls.nodesize)
      throw DomainError("column '" + data.feature_names[col] + "' has too few observed rows (" +
                        std::to_string(observed.size()) + ")");
    controls.mtry = std::min(controls.mtry, predictors.size());

    const Matrix train = out.features.select_rows(observed).select_cols(predictors);
    std::vector<double> target;
    target.reserve(observed.size());
    for (auto i : observed) target.push_back(data.features(i, col));
    const auto forest = fit_forest(train, target, {}, controls);

    auto draws = make_rng(plan.seed, Stream::kImputeDraw, col);
    std::vector<double> query(predictors.size());
    for (auto i : missing) {
      for (std::size_t c = 0; c < predictors.size(); ++c) query[c] = out.features(i, predictors[c]);
      double value;
      if (fill == Fill::kQuantileDraw) {
        // Uniform on (0, 1): resample the measure-zero endpoint.
        double u = uniform01(draws);
        while (u == 0.0) u = uniform01(draws);
        value = conditional_quantile(forest, query, u);
      } else {
        value = predict_mean(forest, query);
      }
      out.features(i, col) = value;
      out.missing_mask[i * out.p() + col] = false;
    }
    if (report) report->columns.push_back({col, data.feature_names[col], missing.size(), step});
    if (plan.use_imputed_columns) {
      predictors.push_back(col);
      std::sort(predictors.begin(), predictors.end());
    }
  }
  return out;
}

}  // namespace

ImputationPlan ImputationPlan::defaults(std::uint64_t seed) {
  ImputationPlan plan;
  plan.seed = seed;
  plan.controls.n_trees = 100;
  plan.controls.nodesize = 5;
  plan.controls.sample_fraction = 0.6;
  plan.controls.with_replacement = false;
  return plan;
}

std::vector<std::size_t> missing_columns(const Dataset& data) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < data.p(); ++j)
    if (data.missing_count(j) > 0) cols.push_back(j);
  return cols;
}

std::vector<std::size_t> imputation_order(const Dataset& data, std::uint64_t seed) {
  auto cols = missing_columns(data);
  auto rng = make_rng(seed, Stream::kImputeOrder);
  for (std::size_t i = 0; i + 1 < cols.size(); ++i) {
    const auto j = i + uniform_index(rng, cols.size() - i);
    std::swap(cols[i], cols[j]);
  }
  return cols;
}

Dataset impute(const Dataset& data, const ImputationPlan& plan, ImputationReport* report) {
  return run_imputation(data, plan, Fill::kQuantileDraw, report);
}

Dataset impute_conditional_mean(const Dataset& data, const ImputationPlan& plan) {
  return run_imputation(data, plan, Fill::kConditionalMean, nullptr);
}

}  // namespace lorf
