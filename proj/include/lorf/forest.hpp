#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lorf/matrix.hpp"
#include "lorf/rng.hpp"

namespace lorf {

/// Tree and ensemble controls. Zero-valued `mtry` and `max_terminal_nodes`
/// mean "default" and are filled in by resolved().
struct ForestControls {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;                // 0 -> ceil(p / 3)
  std::size_t nodesize = 5;            // minimum rows per terminal node
  std::size_t max_terminal_nodes = 0;  // 0 -> unlimited
  std::size_t min_split = 0;           // minimum rows to attempt a split; 0 -> 2 * nodesize
  double complexity = 0.0;             // a split must cut the weighted SSE by this share of the root's
  double sample_fraction = 0.6;        // k_n / n
  bool with_replacement = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // 0 -> all hardware threads

  /// Copy with defaults substituted for a problem with p features.
  ForestControls resolved(std::size_t p) const;
  /// Throws ConfigError on invalid values; expects resolved controls.
  void validate(std::size_t p) const;
  /// Resample size k_n = ceil(sample_fraction * n), at least 1.
  std::size_t resample_size(std::size_t n) const;

  friend bool operator==(const ForestControls&, const ForestControls&) = default;
};

/// A node of a fitted tree. Internal nodes route x to `left` when
/// x[feature] < threshold. Terminal nodes carry the training rows that
/// landed there (one entry per resampled copy) and their weights.
struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;

  std::vector<std::uint32_t> members;
  std::vector<double> member_weights;
  double value = 0.0;         // weighted mean response
  double weight_total = 0.0;  // sum of member_weights
  bool uniform_fallback = false;

  bool is_leaf() const noexcept { return feature == kLeaf; }
};

struct WeightedTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<std::size_t> resample_indices;  // sorted, may repeat
  std::uint64_t seed = 0;

  std::size_t leaf_of(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes[leaf_of(x)].value; }
  std::size_t leaf_count() const;
  /// True when row i is not part of this tree's resample.
  std::vector<bool> out_of_bag_mask(std::size_t n) const;
};

struct WeightedForest {
  std::vector<WeightedTree> trees;
  ForestControls controls;
  std::size_t n_features = 0;
  std::vector<std::string> feature_names;
  std::vector<double> responses;  // training responses, indexed by row
  std::vector<double> weights;    // training weights the forest was grown with

  std::size_t n_train() const noexcept { return responses.size(); }
};

// --- randomization (the xi stream) -----------------------------------------

/// k row indices from [0, n), sorted ascending. With replacement rows may
/// repeat; without replacement k must not exceed n.
std::vector<std::size_t> draw_resample(Rng& rng, std::size_t n, std::size_t k, bool replace);

/// mtry distinct feature indices from [0, p), sorted ascending.
std::vector<std::size_t> draw_feature_subset(Rng& rng, std::size_t p, std::size_t mtry);

// --- splitting -------------------------------------------------------------

/// Weighted variance reduction of splitting `node_rows` at x[feature] < threshold,
/// with means and variances taken under the weight-normalized node measure.
/// Returns nullopt when a child would hold fewer than `nodesize` rows or
/// carry zero total weight.
std::optional<double> split_gain(const Matrix& x, std::span<const double> y,
                                 std::span<const double> w,
                                 std::span<const std::size_t> node_rows, std::size_t feature,
                                 double threshold, std::size_t nodesize = 1);

/// Grows one tree on an explicit resample (entries index rows of x). The
/// rng supplies the per-node feature subsets.
WeightedTree grow_tree_on_resample(const Matrix& x, std::span<const double> y,
                                   std::span<const double> w,
                                   std::vector<std::size_t> resample,
                                   const ForestControls& controls, Rng& rng);

/// Draws the resample from `seed` and grows one tree on it.
WeightedTree grow_weighted_tree(const Matrix& x, std::span<const double> y,
                                std::span<const double> w, const ForestControls& controls,
                                std::uint64_t seed);

// --- forest ----------------------------------------------------------------

/// Fits B trees; tree k uses the seed derive_seed(controls.seed, kTree, k).
/// An empty weight span means uniform weights.
WeightedForest fit_forest(const Matrix& x, std::span<const double> y,
                          std::span<const double> w, const ForestControls& controls);

double predict_mean(const WeightedForest& forest, std::span<const double> x);
std::vector<double> predict_mean(const WeightedForest& forest, const Matrix& x);

/// Dense r_{i,B}(x): averaged within-leaf normalized weights of every
/// training row.
std::vector<double> forest_weights(const WeightedForest& forest, std::span<const double> x);

/// Weighted-CDF quantile: the smallest training response whose cumulative
/// forest weight (responses in ascending order) reaches p. p in (0, 1).
double conditional_quantile(const WeightedForest& forest, std::span<const double> x, double p);

/// Several quantiles at once; shares the weight computation.
std::vector<double> conditional_quantiles(const WeightedForest& forest,
                                          std::span<const double> x,
                                          std::span<const double> levels);

/// Quantile of a discrete distribution given by (value, weight) atoms.
/// Atoms are sorted by value (then index); weights need not be normalized.
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p);

// --- out-of-bag ------------------------------------------------------------

enum class OobMode { kUniform, kWeighted };

struct OobPredictions {
  std::vector<double> prediction;       // NaN where count == 0
  std::vector<std::size_t> tree_count;  // B_i
};

/// OOB prediction of every training row of x (the forest's training matrix).
OobPredictions oob_predictions(const WeightedForest& forest, const Matrix& x);

struct OobResult {
  double error = 0.0;
  std::size_t skipped = 0;  // rows with B_i = 0
};

/// Mean squared OOB error. Weighted mode normalizes by the weights of the
/// rows that were scored. An empty weight span in weighted mode uses the
/// forest's own training weights.
OobResult oob_error(const WeightedForest& forest, const Matrix& x, std::span<const double> y,
                    OobMode mode, std::span<const double> weights = {});

struct TuneRow {
  std::size_t mtry = 0;
  double weighted_oob = 0.0;
  double uniform_oob = 0.0;
};

struct TuneResult {
  ForestControls best;
  std::vector<TuneRow> table;
};

/// Fits one forest per mtry value and keeps the lowest weighted OOB error
/// (ties -> smaller mtry).
TuneResult tune_by_oob(const Matrix& x, std::span<const double> y, std::span<const double> w,
                       std::span<const std::size_t> mtry_grid, const ForestControls& base);

}  // namespace lorf
