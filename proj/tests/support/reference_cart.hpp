#pragma once

// Plain unweighted CART / quantile forest used as an independent reference
// for the weighted implementation. It draws randomness through the same
// public helpers (draw_resample, draw_feature_subset) in the same order, so
// with uniform weights both paths must agree exactly.

#include <cstdint>
#include <span>
#include <vector>

#include "lorf/forest.hpp"
#include "lorf/matrix.hpp"

namespace lorf::testing {

struct RefNode {
  int feature = -1;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::vector<std::size_t> rows;  // resampled copies, ascending
  double value = 0.0;
};

struct RefTree {
  std::vector<RefNode> nodes;
  std::vector<std::size_t> resample;

  std::size_t leaf_of(std::span<const double> x) const;
};

struct RefForest {
  std::vector<RefTree> trees;
  std::vector<double> y;
};

RefTree reference_tree(const Matrix& x, std::span<const double> y, const ForestControls& controls,
                       std::uint64_t seed);
RefForest reference_forest(const Matrix& x, std::span<const double> y,
                           const ForestControls& controls);

double reference_predict(const RefForest& forest, std::span<const double> x);
std::vector<double> reference_weights(const RefForest& forest, std::span<const double> x);
double reference_quantile(const RefForest& forest, std::span<const double> x, double p);
double reference_oob_error(const RefForest& forest, const Matrix& x);

}  // namespace lorf::testing
