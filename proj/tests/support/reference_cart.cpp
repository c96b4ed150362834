#include "reference_cart.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>

namespace lorf::testing {

namespace {

struct Pending {
  std::size_t node;
  std::vector<std::size_t> positions;  // indices into the resample, ascending
};

double mean_of(std::span<const double> ys, const std::vector<std::size_t>& pos) {
  double s = 0.0;
  for (auto q : pos) s += ys[q];
  return s / static_cast<double>(pos.size());
}

struct Best {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Exhaustive search over midpoints; sum of squares reduction divided by the
/// node size, accumulated in the same order as the production scan.
Best best_split(const Matrix& xs, std::span<const double> ys, const std::vector<std::size_t>& pos,
                const std::vector<std::size_t>& features, std::size_t nodesize) {
  const std::size_t n = pos.size();
  const double dn = static_cast<double>(n);
  const double mean = mean_of(ys, pos);
  double total = 0.0;
  double ss = 0.0;
  for (auto q : pos) {
    const double d = ys[q] - mean;
    total += d;
    ss += d * d;
  }
  const double variance = ss / dn;
  const double base = total * total / dn;
  Best best;
  for (auto f : features) {
    std::vector<std::size_t> order = pos;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return xs(a, f) < xs(b, f) || (xs(a, f) == xs(b, f) && a < b);
    });
    double nl_d = 0.0;
    double sl = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      nl_d += 1.0;
      sl += ys[order[i]] - mean;
      const std::size_t nl = i + 1;
      const double xa = xs(order[i], f);
      const double xb = xs(order[i + 1], f);
      if (!(xa < xb) || nl < nodesize) continue;
      if (n - nl < nodesize) break;
      const double nr_d = dn - nl_d;
      const double sr = total - sl;
      const double gain = (sl * sl / nl_d + sr * sr / nr_d - base) / dn;
      if (!(gain > 1e-12 * variance)) continue;
      if (best.feature < 0 || gain > best.gain * (1.0 + 1e-9)) {
        double z = 0.5 * (xa + xb);
        if (!(z > xa)) z = xb;
        best = {static_cast<int>(f), z, gain};
      }
    }
  }
  return best;
}

}  // namespace

std::size_t RefTree::leaf_of(std::span<const double> x) const {
  std::size_t id = 0;
  while (nodes[id].feature >= 0)
    id = x[static_cast<std::size_t>(nodes[id].feature)] < nodes[id].threshold ? nodes[id].left
                                                                              : nodes[id].right;
  return id;
}

RefTree reference_tree(const Matrix& x, std::span<const double> y, const ForestControls& controls,
                       std::uint64_t seed) {
  const auto c = controls.resolved(x.cols());
  Rng rng(seed);
  RefTree tree;
  tree.resample = draw_resample(rng, x.rows(), c.resample_size(x.rows()), c.with_replacement);
  const Matrix xs = x.select_rows(tree.resample);
  std::vector<double> ys;
  for (auto r : tree.resample) ys.push_back(y[r]);

  const std::size_t k = tree.resample.size();
  const std::size_t max_leaves = c.max_terminal_nodes == 0 ? k + 1 : c.max_terminal_nodes;
  std::size_t leaves = 1;
  tree.nodes.emplace_back();
  std::deque<Pending> queue;
  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), std::size_t{0});
  queue.push_back({0, all});

  auto finish = [&](const Pending& p) {
    auto& node = tree.nodes[p.node];
    node.feature = -1;
    node.value = mean_of(ys, p.positions);
    for (auto q : p.positions) node.rows.push_back(tree.resample[q]);
  };

  while (!queue.empty() && leaves < max_leaves) {
    Pending cur = std::move(queue.front());
    queue.pop_front();
    const auto& pos = cur.positions;
    bool constant = true;
    for (auto q : pos) constant = constant && ys[q] == ys[pos.front()];
    if (pos.size() < 2 * c.nodesize || constant) {
      finish(cur);
      continue;
    }
    const auto features = draw_feature_subset(rng, x.cols(), c.mtry);
    const Best best = best_split(xs, ys, pos, features, c.nodesize);
    if (best.feature < 0) {
      finish(cur);
      continue;
    }
    Pending left{tree.nodes.size(), {}};
    Pending right{tree.nodes.size() + 1, {}};
    for (auto q : pos)
      (xs(q, static_cast<std::size_t>(best.feature)) < best.threshold ? left : right).positions.push_back(q);
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[cur.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left.node;
    node.right = right.node;
    queue.push_back(std::move(left));
    queue.push_back(std::move(right));
    ++leaves;
  }
  for (const auto& p : queue) finish(p);
  return tree;
}

RefForest reference_forest(const Matrix& x, std::span<const double> y,
                           const ForestControls& controls) {
  RefForest forest;
  forest.y.assign(y.begin(), y.end());
  for (std::size_t k = 0; k < controls.n_trees; ++k)
    forest.trees.push_back(reference_tree(x, y, controls, derive_seed(controls.seed, Stream::kTree, k)));
  return forest;
}

double reference_predict(const RefForest& forest, std::span<const double> x) {
  double s = 0.0;
  for (const auto& t : forest.trees) s += t.nodes[t.leaf_of(x)].value;
  return s / static_cast<double>(forest.trees.size());
}

std::vector<double> reference_weights(const RefForest& forest, std::span<const double> x) {
  std::vector<double> r(forest.y.size(), 0.0);
  for (const auto& t : forest.trees) {
    const auto& leaf = t.nodes[t.leaf_of(x)];
    const double size = static_cast<double>(leaf.rows.size());
    for (auto row : leaf.rows) r[row] += 1.0 / size;
  }
  for (auto& v : r) v /= static_cast<double>(forest.trees.size());
  return r;
}

double reference_quantile(const RefForest& forest, std::span<const double> x, double p) {
  const auto r = reference_weights(forest, x);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r[i] > 0.0) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return forest.y[a] < forest.y[b] || (forest.y[a] == forest.y[b] && a < b);
  });
  double total = 0.0;
  for (auto i : idx) total += r[i];
  double cum = 0.0;
  for (auto i : idx) {
    cum += r[i];
    if (cum >= p * total) return forest.y[i];
  }
  return forest.y[idx.back()];
}

double reference_oob_error(const RefForest& forest, const Matrix& x) {
  const std::size_t n = forest.y.size();
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& t : forest.trees) {
    std::vector<bool> in_bag(n, false);
    for (auto r : t.resample) in_bag[r] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      sum[i] += t.nodes[t.leaf_of(x.row(i))].value;
      ++count[i];
    }
  }
  double se = 0.0;
  double scored = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] == 0) continue;
    const double e = sum[i] / static_cast<double>(count[i]) - forest.y[i];
    se += e * e;
    scored += 1.0;
  }
  return se / scored;
}

}  // namespace lorf::testing
