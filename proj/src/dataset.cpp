#include "lorf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lorf/error.hpp"

namespace lorf {

namespace {

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  s = s.substr(begin, end - begin + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

bool is_missing_token(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "na";
}

std::optional<double> parse_number(const std::string& cell) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

}  // namespace

void Dataset::set_missing(std::size_t i, std::size_t j, bool missing) {
  missing_mask[i * p() + j] = missing;
  if (missing) features(i, j) = kMissing;
}

bool Dataset::has_missing() const {
  return std::find(missing_mask.begin(), missing_mask.end(), true) != missing_mask.end();
}

std::size_t Dataset::missing_count(std::size_t column) const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n(); ++i) count += is_missing(i, column) ? 1 : 0;
  return count;
}

void Dataset::validate() const {
  if (n() < 1 || p() < 1) throw ConfigError("dataset must have at least one row and one column");
  if (response && response->size() != n())
    throw ConfigError("response length does not match the number of rows");
  if (missing_mask.size() != n() * p()) throw ConfigError("missing mask has the wrong size");
  if (feature_names.size() != p()) throw ConfigError("feature name count does not match columns");
  for (std::size_t i = 0; i < n(); ++i)
    for (std::size_t j = 0; j < p(); ++j)
      if (!is_missing(i, j) && std::isnan(features(i, j)))
        throw ConfigError("unflagged NaN at row " + std::to_string(i + 1));
}

Dataset Dataset::from_matrix(Matrix features, std::optional<std::vector<double>> response) {
  Dataset d;
  d.feature_names.reserve(features.cols());
  for (std::size_t j = 0; j < features.cols(); ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
  d.missing_mask.assign(features.rows() * features.cols(), false);
  d.features = std::move(features);
  d.response = std::move(response);
  return d;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

Dataset parse_dataset(const std::string& csv_text, const std::optional<std::string>& response_column) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw ParseError("missing header row", 0);
  auto header = split_csv_line(line);

  std::optional<std::size_t> response_idx;
  if (response_column) {
    auto it = std::find(header.begin(), header.end(), *response_column);
    if (it == header.end())
      throw ConfigError("response column '" + *response_column + "' not found in header");
    response_idx = static_cast<std::size_t>(it - header.begin());
  }

  Dataset d;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != response_idx) d.feature_names.push_back(header[j]);
  if (response_idx) d.response_name = header[*response_idx];
  if (d.feature_names.empty()) throw ConfigError("no feature columns");

  Matrix features;
  std::vector<double> response;
  std::vector<bool> mask;
  std::vector<double> row_values(d.feature_names.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       row);
    std::size_t col = 0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto& cell = cells[j];
      if (j == response_idx) {
        auto v = parse_number(cell);
        if (!v || std::isnan(*v))
          throw ParseError("response value '" + cell + "' is missing or not numeric", row);
        response.push_back(*v);
        continue;
      }
      if (is_missing_token(cell)) {
        row_values[col] = kMissing;
        mask.push_back(true);
      } else {
        auto v = parse_number(cell);
        if (!v) throw ParseError("non-numeric value '" + cell + "' in column '" + header[j] + "'", row);
        row_values[col] = *v;
        mask.push_back(false);
      }
      ++col;
    }
    features.push_row(row_values);
  }
  if (row == 0) throw ParseError("no data rows", 0);
  d.features = std::move(features);
  d.missing_mask = std::move(mask);
  if (response_idx) d.response = std::move(response);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const std::optional<std::string>& response_column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), response_column);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_dataset(const Dataset& data) {
  std::ostringstream out;
  for (std::size_t j = 0; j < data.p(); ++j) out << (j ? "," : "") << data.feature_names[j];
  if (data.response) out << ',' << data.response_name;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) {
      if (j) out << ',';
      if (!data.is_missing(i, j)) out << format_double(data.features(i, j));
    }
    if (data.response) out << ',' << format_double((*data.response)[i]);
    out << '\n';
  }
  return out.str();
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << format_dataset(data);
}

}  // namespace lorf
