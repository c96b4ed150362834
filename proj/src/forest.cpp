#include "lorf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lorf/error.hpp"
#include "lorf/parallel.hpp"

namespace lorf {

namespace {

// A split must explain at least this fraction of the node variance.
constexpr double kMinRelativeGain = 1e-12;
// Gains this close (relative) are ties: different features inducing the same
// partition give equal gains up to summation order, and the earlier candidate
// (smaller feature, then smaller threshold) must win regardless of weight scale.
constexpr double kRelativeTieTolerance = 1e-9;

void check_training_inputs(const Matrix& x, std::span<const double> y,
                           std::span<const double> w) {
  if (x.rows() == 0 || x.cols() == 0) throw ConfigError("empty training matrix");
  if (y.size() != x.rows()) throw ConfigError("response length does not match rows");
  if (!w.empty() && w.size() != x.rows()) throw ConfigError("weight length does not match rows");
  for (double v : x.data())
    if (!std::isfinite(v)) throw ConfigError("training features must be finite (impute first)");
  for (double v : y)
    if (!std::isfinite(v)) throw ConfigError("training responses must be finite");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("weights must be finite and >= 0");
    total += v;
  }
  if (!w.empty() && !(total > 0.0)) throw ConfigError("weights are all zero");
}

/// Breadth-first weighted CART on one resample. Each feature keeps its own
/// sorted copy of the sample positions; a node occupies the same [begin, end)
/// range in every copy, and splits stable-partition that range. Slot p holds
/// the positions in ascending order and fixes the summation order of node
/// and leaf statistics.
class TreeGrower {
 public:
  TreeGrower(const Matrix& x, std::span<const double> y, std::span<const double> w,
             std::vector<std::size_t> resample, const ForestControls& controls, Rng& rng)
      : controls_(controls),
        rng_(rng),
        k_(resample.size()),
        p_(x.cols()),
        rows_(std::move(resample)),
        xk_(p_ * k_),
        yk_(k_),
        wk_(k_),
        order_((p_ + 1) * k_),
        is_left_(k_),
        scratch_(k_) {
    for (std::size_t s = 0; s < k_; ++s) {
      const auto r = rows_[s];
      yk_[s] = y[r];
      wk_[s] = w.empty() ? 1.0 : w[r];
      for (std::size_t f = 0; f < p_; ++f) xk_[f * k_ + s] = x(r, f);
    }
    for (std::size_t f = 0; f <= p_; ++f) {
      auto* ord = order_.data() + f * k_;
      std::iota(ord, ord + k_, std::uint32_t{0});
      if (f == p_) continue;
      const double* xv = xk_.data() + f * k_;
      std::sort(ord, ord + k_, [xv](std::uint32_t a, std::uint32_t b) {
        return xv[a] < xv[b] || (xv[a] == xv[b] && a < b);
      });
    }
  }

  WeightedTree grow() {
    WeightedTree tree;
    tree.resample_indices = rows_;
    tree.nodes.emplace_back();

    // Depth-indexed frontier; A is always the first element of P_d.
    std::vector<std::vector<Work>> frontier(1);
    frontier[0].push_back({0, k_, 0});
    const std::size_t max_leaves =
        controls_.max_terminal_nodes == 0 ? k_ + 1 : controls_.max_terminal_nodes;
    std::size_t terminal = 1;
    std::size_t depth = 0;
    {
      const NodeStats root = stats({0, k_, 0});
      min_reduction_ = controls_.complexity * root.variance * root.weight;
    }
    std::size_t cursor = 0;
    while (terminal < max_leaves && depth < frontier.size()) {
      if (cursor == frontier[depth].size()) {
        ++depth;
        cursor = 0;
        continue;
      }
      const Work node = frontier[depth][cursor++];
      auto split = find_split(node);
      if (!split) {
        make_leaf(tree, node);
        continue;
      }
      const std::size_t mid = node.begin + split->left_count;
      partition(node, split->feature, mid);
      const auto left = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& parent = tree.nodes[node.node];
      parent.feature = static_cast<std::int32_t>(split->feature);
      parent.threshold = split->threshold;
      parent.left = left;
      parent.right = left + 1;
      if (frontier.size() == depth + 1) frontier.emplace_back();
      frontier[depth + 1].push_back({node.begin, mid, left});
      frontier[depth + 1].push_back({mid, node.end, left + 1});
      ++terminal;
    }
    // Anything still queued is terminal.
    for (std::size_t d = depth; d < frontier.size(); ++d)
      for (std::size_t i = (d == depth ? cursor : 0); i < frontier[d].size(); ++i)
        make_leaf(tree, frontier[d][i]);
    return tree;
  }

 private:
  struct Work {
    std::size_t begin;
    std::size_t end;
    std::uint32_t node;
  };
  struct Split {
    std::size_t feature;
    double threshold;
    std::size_t left_count;
  };
  struct NodeStats {
    double weight;
    double mean;
    double centered_total;
    double variance;
    bool uniform;
    bool constant;
  };

  const std::uint32_t* ord(std::size_t f) const { return order_.data() + f * k_; }

  NodeStats stats(const Work& node) const {
    const auto* canon = ord(p_);
    NodeStats st{};
    double wsum = 0.0;
    double ysum = 0.0;
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const auto s = canon[i];
      wsum += wk_[s];
      ysum += wk_[s] * yk_[s];
    }
    st.uniform = !(wsum > 0.0) || !std::isfinite(wsum);
    if (st.uniform) {
      wsum = 0.0;
      ysum = 0.0;
      for (std::size_t i = node.begin; i < node.end; ++i) {
        wsum += 1.0;
        ysum += yk_[canon[i]];
      }
    }
    st.weight = wsum;
    st.mean = ysum / wsum;
    double ymin = yk_[canon[node.begin]];
    double ymax = ymin;
    double total = 0.0;
    double ss = 0.0;
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const auto s = canon[i];
      const double wi = st.uniform ? 1.0 : wk_[s];
      const double d = yk_[s] - st.mean;
      total += wi * d;
      ss += wi * d * d;
      ymin = std::min(ymin, yk_[s]);
      ymax = std::max(ymax, yk_[s]);
    }
    st.centered_total = total;
    st.variance = ss / wsum;
    st.constant = ymin == ymax;
    return st;
  }

  std::optional<Split> find_split(const Work& node) {
    const std::size_t count = node.end - node.begin;
    if (count < std::max(2 * controls_.nodesize, controls_.min_split)) return std::nullopt;
    const NodeStats st = stats(node);
    if (st.constant || !(st.variance > 0.0)) return std::nullopt;

    const auto features = draw_feature_subset(rng_, p_, controls_.mtry);
    const double total_w = st.weight;
    const double total_c = st.centered_total;
    const double base = total_c * total_c / total_w;
    const double min_gain = kMinRelativeGain * st.variance;

    std::optional<Split> best;
    double best_gain = 0.0;
    for (std::size_t f : features) {
      const auto* o = ord(f);
      const double* xv = xk_.data() + f * k_;
      double wl = 0.0;
      double sl = 0.0;
      std::size_t nl = 0;
      for (std::size_t i = node.begin; i + 1 < node.end; ++i) {
        const auto s = o[i];
        const double wi = st.uniform ? 1.0 : wk_[s];
        wl += wi;
        sl += wi * (yk_[s] - st.mean);
        ++nl;
        const double xa = xv[s];
        const double xb = xv[o[i + 1]];
        if (!(xa < xb)) continue;
        if (nl < controls_.nodesize) continue;
        if (count - nl < controls_.nodesize) break;
        const double wr = total_w - wl;
        if (!(wl > 0.0) || !(wr > total_w * 1e-12)) continue;
        const double sr = total_c - sl;
        const double gain = (sl * sl / wl + sr * sr / wr - base) / total_w;
        if (!std::isfinite(gain) || !(gain > min_gain)) continue;
        if (!best || gain > best_gain * (1.0 + kRelativeTieTolerance)) {
          double z = 0.5 * (xa + xb);
          if (!(z > xa)) z = xb;
          best = Split{f, z, nl};
          best_gain = gain;
        }
      }
    }
    if (best && controls_.complexity > 0.0 && !(best_gain * total_w >= min_reduction_)) return std::nullopt;
    return best;
  }

  void partition(const Work& node, std::size_t feature, std::size_t mid) {
    const auto* split_order = ord(feature);
    for (std::size_t i = node.begin; i < node.end; ++i) is_left_[split_order[i]] = i < mid;
    for (std::size_t f = 0; f <= p_; ++f) {
      auto* o = order_.data() + f * k_;
      std::size_t l = node.begin;
      std::size_t r = 0;
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const auto s = o[i];
        if (is_left_[s]) {
          o[l++] = s;
        } else {
          scratch_[r++] = s;
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), o + l);
    }
  }

  void make_leaf(WeightedTree& tree, const Work& node) const {
    const NodeStats st = stats(node);
    auto& leaf = tree.nodes[node.node];
    leaf.feature = TreeNode::kLeaf;
    leaf.uniform_fallback = st.uniform;
    leaf.value = st.mean;
    leaf.weight_total = st.weight;
    const auto* canon = ord(p_);
    leaf.members.reserve(node.end - node.begin);
    leaf.member_weights.reserve(node.end - node.begin);
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const auto s = canon[i];
      leaf.members.push_back(static_cast<std::uint32_t>(rows_[s]));
      leaf.member_weights.push_back(st.uniform ? 1.0 : wk_[s]);
    }
  }

  const ForestControls& controls_;
  Rng& rng_;
  std::size_t k_;
  std::size_t p_;
  std::vector<std::size_t> rows_;
  std::vector<double> xk_;  // feature-major copy of the resample
  std::vector<double> yk_;
  std::vector<double> wk_;
  std::vector<std::uint32_t> order_;
  std::vector<char> is_left_;
  std::vector<std::uint32_t> scratch_;
  double min_reduction_ = 0.0;  // complexity x root weighted SSE
};

/// Sparse accumulation of the forest weights at x: (row, sum of t_i).
std::vector<double> accumulate_forest_weights(const WeightedForest& forest,
                                              std::span<const double> x) {
  if (x.size() != forest.n_features)
    throw DimensionError("query has " + std::to_string(x.size()) + " features, forest expects " +
                         std::to_string(forest.n_features));
  std::vector<double> r(forest.n_train(), 0.0);
  for (const auto& tree : forest.trees) {
    const auto& leaf = tree.nodes[tree.leaf_of(x)];
    for (std::size_t m = 0; m < leaf.members.size(); ++m)
      r[leaf.members[m]] += leaf.member_weights[m] / leaf.weight_total;
  }
  const double b = static_cast<double>(forest.trees.size());
  for (auto& v : r) v /= b;
  return r;
}

double quantile_from_weights(const WeightedForest& forest, const std::vector<double>& r,
                             double p, std::vector<std::size_t>& support) {
  support.clear();
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r[i] > 0.0) support.push_back(i);
  const auto& y = forest.responses;
  std::sort(support.begin(), support.end(), [&y](std::size_t a, std::size_t b) {
    return y[a] < y[b] || (y[a] == y[b] && a < b);
  });
  double total = 0.0;
  for (auto i : support) total += r[i];
  const double target = p * total;
  double cumulative = 0.0;
  for (auto i : support) {
    cumulative += r[i];
    if (cumulative >= target) return y[i];
  }
  return y[support.back()];
}

void check_level(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
}

}  // namespace

ForestControls ForestControls::resolved(std::size_t p) const {
  ForestControls c = *this;
  if (c.mtry == 0) c.mtry = std::max<std::size_t>(1, (p + 2) / 3);
  return c;
}

void ForestControls::validate(std::size_t p) const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (mtry < 1 || mtry > p) throw ConfigError("mtry must lie in [1, p]");
  if (nodesize < 1) throw ConfigError("nodesize must be >= 1");
  if (!(complexity >= 0.0 && complexity < 1.0)) throw ConfigError("complexity must lie in [0, 1)");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
    throw ConfigError("sample_fraction must lie in (0, 1]");
}

std::size_t ForestControls::resample_size(std::size_t n) const {
  const auto k = static_cast<std::size_t>(std::ceil(sample_fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

std::size_t WeightedTree::leaf_of(std::span<const double> x) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf()) {
    const auto& nd = nodes[id];
    id = x[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
  }
  return id;
}

std::size_t WeightedTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<bool> WeightedTree::out_of_bag_mask(std::size_t n) const {
  std::vector<bool> oob(n, true);
  for (auto r : resample_indices) oob[r] = false;
  return oob;
}

std::vector<std::size_t> draw_resample(Rng& rng, std::size_t n, std::size_t k, bool replace) {
  std::vector<std::size_t> out;
  out.reserve(k);
  if (replace) {
    for (std::size_t i = 0; i < k; ++i) out.push_back(uniform_index(rng, n));
  } else {
    if (k > n) throw ConfigError("cannot draw more rows than available without replacement");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + uniform_index(rng, n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> draw_feature_subset(Rng& rng, std::size_t p, std::size_t mtry) {
  if (mtry >= p) {
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  return draw_resample(rng, p, mtry, false);
}

std::optional<double> split_gain(const Matrix& x, std::span<const double> y,
                                 std::span<const double> w,
                                 std::span<const std::size_t> node_rows, std::size_t feature,
                                 double threshold, std::size_t nodesize) {
  auto weight = [&](std::size_t r) { return w.empty() ? 1.0 : w[r]; };
  struct Moments {
    double w = 0.0, wy = 0.0;
    std::size_t n = 0;
  } all, left, right;
  for (auto r : node_rows) {
    auto& side = x(r, feature) < threshold ? left : right;
    side.w += weight(r);
    side.wy += weight(r) * y[r];
    ++side.n;
    all.w += weight(r);
    all.wy += weight(r) * y[r];
  }
  if (left.n < nodesize || right.n < nodesize || !(left.w > 0.0) || !(right.w > 0.0))
    return std::nullopt;
  const double mean = all.wy / all.w;
  const double mean_l = left.wy / left.w;
  const double mean_r = right.wy / right.w;
  double parent = 0.0;
  double children = 0.0;
  for (auto r : node_rows) {
    const double wi = weight(r) / all.w;
    parent += wi * (y[r] - mean) * (y[r] - mean);
    const double m = x(r, feature) < threshold ? mean_l : mean_r;
    children += wi * (y[r] - m) * (y[r] - m);
  }
  return parent - children;
}

WeightedTree grow_tree_on_resample(const Matrix& x, std::span<const double> y,
                                   std::span<const double> w, std::vector<std::size_t> resample,
                                   const ForestControls& controls, Rng& rng) {
  if (resample.empty()) throw ConfigError("empty resample");
  const auto c = controls.resolved(x.cols());
  c.validate(x.cols());
  TreeGrower grower(x, y, w, std::move(resample), c, rng);
  return grower.grow();
}

WeightedTree grow_weighted_tree(const Matrix& x, std::span<const double> y,
                                std::span<const double> w, const ForestControls& controls,
                                std::uint64_t seed) {
  Rng rng(seed);
  auto resample =
      draw_resample(rng, x.rows(), controls.resample_size(x.rows()), controls.with_replacement);
  auto tree = grow_tree_on_resample(x, y, w, std::move(resample), controls, rng);
  tree.seed = seed;
  return tree;
}

WeightedForest fit_forest(const Matrix& x, std::span<const double> y, std::span<const double> w,
                          const ForestControls& controls) {
  check_training_inputs(x, y, w);
  const auto c = controls.resolved(x.cols());
  c.validate(x.cols());

  WeightedForest forest;
  forest.controls = c;
  forest.n_features = x.cols();
  for (std::size_t j = 0; j < x.cols(); ++j) forest.feature_names.push_back("x" + std::to_string(j + 1));
  forest.responses.assign(y.begin(), y.end());
  if (w.empty()) {
    forest.weights.assign(x.rows(), 1.0);
  } else {
    forest.weights.assign(w.begin(), w.end());
  }
  forest.trees.resize(c.n_trees);
  parallel_for(c.n_trees, c.threads, [&](std::size_t k) {
    forest.trees[k] = grow_weighted_tree(x, y, forest.weights, c, derive_seed(c.seed, Stream::kTree, k));
  });
  return forest;
}

double predict_mean(const WeightedForest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features)
    throw DimensionError("query has " + std::to_string(x.size()) + " features, forest expects " +
                         std::to_string(forest.n_features));
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += tree.predict(x);
  return sum / static_cast<double>(forest.trees.size());
}

std::vector<double> predict_mean(const WeightedForest& forest, const Matrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_mean(forest, x.row(i));
  return out;
}

std::vector<double> forest_weights(const WeightedForest& forest, std::span<const double> x) {
  return accumulate_forest_weights(forest, x);
}

double conditional_quantile(const WeightedForest& forest, std::span<const double> x, double p) {
  check_level(p);
  const auto r = accumulate_forest_weights(forest, x);
  std::vector<std::size_t> support;
  return quantile_from_weights(forest, r, p, support);
}

std::vector<double> conditional_quantiles(const WeightedForest& forest, std::span<const double> x,
                                          std::span<const double> levels) {
  for (double p : levels) check_level(p);
  const auto r = accumulate_forest_weights(forest, x);
  std::vector<std::size_t> support;
  std::vector<double> out;
  out.reserve(levels.size());
  for (double p : levels) out.push_back(quantile_from_weights(forest, r, p, support));
  return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double p) {
  check_level(p);
  if (values.empty() || values.size() != weights.size())
    throw ConfigError("weighted_quantile needs matching, nonempty inputs");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  double total = 0.0;
  for (auto i : idx) total += weights[i];
  if (!(total > 0.0)) throw DomainError("weighted_quantile needs positive total weight");
  const double target = p * total;
  double cumulative = 0.0;
  for (auto i : idx) {
    cumulative += weights[i];
    if (weights[i] > 0.0 && cumulative >= target) return values[i];
  }
  return values[idx.back()];
}

OobPredictions oob_predictions(const WeightedForest& forest, const Matrix& x) {
  const std::size_t n = forest.n_train();
  if (x.rows() != n || x.cols() != forest.n_features)
    throw DimensionError("OOB needs the forest's training matrix");
  OobPredictions out;
  out.prediction.assign(n, 0.0);
  out.tree_count.assign(n, 0);
  for (const auto& tree : forest.trees) {
    const auto oob = tree.out_of_bag_mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!oob[i]) continue;
      out.prediction[i] += tree.predict(x.row(i));
      ++out.tree_count[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    out.prediction[i] = out.tree_count[i] == 0
                            ? std::numeric_limits<double>::quiet_NaN()
                            : out.prediction[i] / static_cast<double>(out.tree_count[i]);
  return out;
}

OobResult oob_error(const WeightedForest& forest, const Matrix& x, std::span<const double> y,
                    OobMode mode, std::span<const double> weights) {
  if (y.size() != forest.n_train()) throw DimensionError("response length does not match forest");
  if (mode == OobMode::kWeighted && weights.empty()) weights = forest.weights;
  if (mode == OobMode::kWeighted && weights.size() != y.size())
    throw DimensionError("weight length does not match forest");
  const auto oob = oob_predictions(forest, x);
  OobResult result;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (oob.tree_count[i] == 0) {
      ++result.skipped;
      continue;
    }
    const double r = oob.prediction[i] - y[i];
    const double wi = mode == OobMode::kWeighted ? weights[i] : 1.0;
    num += wi * r * r;
    den += wi;
  }
  if (result.skipped == y.size()) throw DomainError("every row is in-bag for every tree");
  if (!(den > 0.0)) throw DomainError("out-of-bag rows carry zero total weight");
  result.error = num / den;
  return result;
}

TuneResult tune_by_oob(const Matrix& x, std::span<const double> y, std::span<const double> w,
                       std::span<const std::size_t> mtry_grid, const ForestControls& base) {
  if (mtry_grid.empty()) throw ConfigError("mtry grid is empty");
  std::vector<std::size_t> grid(mtry_grid.begin(), mtry_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  TuneResult result;
  double best = std::numeric_limits<double>::infinity();
  for (auto mtry : grid) {
    auto c = base;
    c.mtry = mtry;
    const auto forest = fit_forest(x, y, w, c);
    TuneRow row;
    row.mtry = mtry;
    row.weighted_oob = oob_error(forest, x, y, OobMode::kWeighted, w).error;
    row.uniform_oob = oob_error(forest, x, y, OobMode::kUniform).error;
    result.table.push_back(row);
    if (row.weighted_oob < best) {
      best = row.weighted_oob;
      result.best = forest.controls;
    }
  }
  return result;
}

}  // namespace lorf
