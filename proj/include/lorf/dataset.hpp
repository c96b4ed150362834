#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lorf/matrix.hpp"

namespace lorf {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Feature matrix with an optional response column and a missingness mask.
/// Missing cells hold NaN in `features`; the mask is authoritative.
struct Dataset {
  Matrix features;
  std::optional<std::vector<double>> response;
  std::vector<bool> missing_mask;  // row-major n*p
  std::vector<std::string> feature_names;
  std::string response_name = "y";

  std::size_t n() const noexcept { return features.rows(); }
  std::size_t p() const noexcept { return features.cols(); }

  bool is_missing(std::size_t i, std::size_t j) const {
    return missing_mask[i * p() + j];
  }
  void set_missing(std::size_t i, std::size_t j, bool missing);

  bool has_missing() const;
  std::size_t missing_count(std::size_t column) const;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;

  /// Builds a complete dataset (mask all false) with names x1..xp.
  static Dataset from_matrix(Matrix features,
                             std::optional<std::vector<double>> response = std::nullopt);
};

/// Reads a CSV file with a mandatory header row. Empty cells and the tokens
/// NA / NaN / nan are missing. When `response_column` is given, that column
/// becomes the response and is removed from the features.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::string>& response_column = std::nullopt);

/// Same as load_dataset but from an in-memory CSV document.
Dataset parse_dataset(const std::string& csv_text,
                      const std::optional<std::string>& response_column = std::nullopt);

/// Writes features (and the response as the last column, when present).
/// Missing cells are written empty, so load_dataset reproduces the mask.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
std::string format_dataset(const Dataset& data);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Splits one CSV line on commas, trimming surrounding whitespace and
/// optional double quotes from each field.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace lorf
