#include "lorf/forest_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "lorf/error.hpp"

namespace lorf {

using nlohmann::json;

namespace {

json controls_to_json(const ForestControls& c) {
  return {{"n_trees", c.n_trees},
          {"mtry", c.mtry},
          {"nodesize", c.nodesize},
          {"max_terminal_nodes", c.max_terminal_nodes},
          {"min_split", c.min_split},
          {"complexity", c.complexity},
          {"sample_fraction", c.sample_fraction},
          {"with_replacement", c.with_replacement},
          {"seed", c.seed}};
}

ForestControls controls_from_json(const json& j) {
  ForestControls c;
  c.n_trees = j.at("n_trees").get<std::size_t>();
  c.mtry = j.at("mtry").get<std::size_t>();
  c.nodesize = j.at("nodesize").get<std::size_t>();
  c.max_terminal_nodes = j.at("max_terminal_nodes").get<std::size_t>();
  c.min_split = j.value("min_split", std::size_t{0});
  c.complexity = j.value("complexity", 0.0);
  c.sample_fraction = j.at("sample_fraction").get<double>();
  c.with_replacement = j.at("with_replacement").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

// Column-wise node arrays: feature (-1 for leaves), threshold, left, right,
// plus one leaf record per terminal node in node order.
json tree_to_json(const WeightedTree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), leaves = json::array();
  for (const auto& nd : t.nodes) {
    feature.push_back(nd.feature);
    threshold.push_back(nd.threshold);
    left.push_back(nd.left);
    right.push_back(nd.right);
    if (nd.is_leaf())
      leaves.push_back({{"value", nd.value},
                        {"weight_total", nd.weight_total},
                        {"uniform_fallback", nd.uniform_fallback},
                        {"members", nd.members},
                        {"weights", nd.member_weights}});
  }
  return {{"seed", t.seed},
          {"resample", t.resample_indices},
          {"feature", feature},
          {"threshold", threshold},
          {"left", left},
          {"right", right},
          {"leaves", leaves}};
}

WeightedTree tree_from_json(const json& j) {
  WeightedTree t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.resample_indices = j.at("resample").get<std::vector<std::size_t>>();
  const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<std::uint32_t>>();
  const auto right = j.at("right").get<std::vector<std::uint32_t>>();
  const auto& leaves = j.at("leaves");
  if (threshold.size() != feature.size() || left.size() != feature.size() ||
      right.size() != feature.size())
    throw ConfigError("tree node arrays have different lengths");
  t.nodes.resize(feature.size());
  std::size_t leaf = 0;
  for (std::size_t i = 0; i < feature.size(); ++i) {
    auto& nd = t.nodes[i];
    nd.feature = feature[i];
    nd.threshold = threshold[i];
    nd.left = left[i];
    nd.right = right[i];
    if (!nd.is_leaf()) {
      if (nd.left >= feature.size() || nd.right >= feature.size())
        throw ConfigError("tree child index out of range");
      continue;
    }
    if (leaf >= leaves.size()) throw ConfigError("tree has fewer leaf records than leaves");
    const auto& l = leaves[leaf++];
    nd.value = l.at("value").get<double>();
    nd.weight_total = l.at("weight_total").get<double>();
    nd.uniform_fallback = l.at("uniform_fallback").get<bool>();
    nd.members = l.at("members").get<std::vector<std::uint32_t>>();
    nd.member_weights = l.at("weights").get<std::vector<double>>();
    if (nd.members.size() != nd.member_weights.size())
      throw ConfigError("leaf member and weight counts differ");
  }
  if (t.nodes.empty()) throw ConfigError("tree has no nodes");
  return t;
}

}  // namespace

std::string forest_to_json(const WeightedForest& forest) {
  json trees = json::array();
  for (const auto& t : forest.trees) trees.push_back(tree_to_json(t));
  json doc = {{"format", "lorf-forest"},
              {"version", kModelFormatVersion},
              {"controls", controls_to_json(forest.controls)},
              {"n_features", forest.n_features},
              {"feature_names", forest.feature_names},
              {"responses", forest.responses},
              {"weights", forest.weights},
              {"trees", trees}};
  return doc.dump() + "\n";
}

WeightedForest forest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid model JSON: ") + e.what(), 0);
  }
  try {
    if (doc.at("format") != "lorf-forest") throw ConfigError("not a lorf forest document");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw ConfigError("unsupported model version " + std::to_string(version));
    WeightedForest forest;
    forest.controls = controls_from_json(doc.at("controls"));
    forest.n_features = doc.at("n_features").get<std::size_t>();
    forest.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    forest.responses = doc.at("responses").get<std::vector<double>>();
    forest.weights = doc.at("weights").get<std::vector<double>>();
    for (const auto& t : doc.at("trees")) forest.trees.push_back(tree_from_json(t));
    if (forest.trees.empty()) throw ConfigError("model has no trees");
    for (const auto& t : forest.trees)
      for (const auto& nd : t.nodes)
        for (auto m : nd.members)
          if (m >= forest.responses.size()) throw ConfigError("leaf member index out of range");
    return forest;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model document: ") + e.what());
  }
}

void save_forest(const WeightedForest& forest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << forest_to_json(forest);
}

WeightedForest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return forest_from_json(buffer.str());
}

}  // namespace lorf
