#pragma once

#include <filesystem>
#include <string>

#include "lorf/forest.hpp"

namespace lorf {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON document holding the controls, training responses and
/// weights, and every tree's node arrays, resample and seed. Doubles are
/// written in shortest round-trip form, so a reloaded forest predicts
/// bit-identically.
std::string forest_to_json(const WeightedForest& forest);
WeightedForest forest_from_json(const std::string& text);

void save_forest(const WeightedForest& forest, const std::filesystem::path& path);
WeightedForest load_forest(const std::filesystem::path& path);

}  // namespace lorf
