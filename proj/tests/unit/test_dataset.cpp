#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lorf/dataset.hpp"
#include "lorf/error.hpp"

using namespace lorf;

TEST_CASE("complete csv parses into features and response") {
  const auto d = parse_dataset("x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n", "y");
  CHECK(d.n() == 3);
  CHECK(d.p() == 2);
  REQUIRE(d.response.has_value());
  CHECK((*d.response)[2] == 9.0);
  CHECK_FALSE(d.has_missing());
  CHECK(d.feature_names == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("an empty cell sets exactly that mask entry") {
  const auto d = parse_dataset("x1,x2,y\n1,2,3\n4,,6\n7,8,9\n", "y");
  for (std::size_t i = 0; i < d.n(); ++i)
    for (std::size_t j = 0; j < d.p(); ++j) CHECK(d.is_missing(i, j) == (i == 1 && j == 1));
  CHECK(std::isnan(d.features(1, 1)));
  CHECK(d.missing_count(1) == 1);
}

TEST_CASE("NA tokens are missing") {
  const auto d = parse_dataset("a,b\nNA,1\n2,NaN\n");
  CHECK(d.is_missing(0, 0));
  CHECK(d.is_missing(1, 1));
  CHECK_FALSE(d.is_missing(0, 1));
}

TEST_CASE("a non-numeric token is a parse error naming the row") {
  try {
    parse_dataset("x1,x2,y\n1,2,3\n4,abc,6\n", "y");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(std::string(e.what()).find("abc") != std::string::npos);
  }
}

TEST_CASE("header and schema errors") {
  CHECK_THROWS_AS(parse_dataset(""), ParseError);
  CHECK_THROWS_AS(parse_dataset("x1,y\n1,2\n", "z"), ConfigError);
  CHECK_THROWS_AS(parse_dataset("x1,y\n1\n"), ParseError);
  CHECK_THROWS_AS(parse_dataset("x1,y\n1,\n", "y"), ParseError);
}

TEST_CASE("write then load reproduces values and mask") {
  auto d = parse_dataset("a,b,y\n0.1,,1\n-2.5e-7,3,2\n", "y");
  const auto path = std::filesystem::temp_directory_path() / "lorf_dataset_roundtrip.csv";
  write_dataset(d, path);
  const auto back = load_dataset(path, "y");
  CHECK(back.feature_names == d.feature_names);
  CHECK(back.missing_mask == d.missing_mask);
  CHECK(back.features(1, 0) == d.features(1, 0));
  CHECK(*back.response == *d.response);
  std::filesystem::remove(path);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -1e-300, 12345.678, 0.0})
    CHECK(std::stod(format_double(v)) == v);
}
