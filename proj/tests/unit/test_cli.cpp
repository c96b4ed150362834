#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "lorf/cli.hpp"
#include "lorf/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = lorf::run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("lorf_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_csv(const std::string& path, std::uint64_t seed, std::size_t n, double shift) {
  lorf::Rng rng(seed);
  std::ofstream f(path);
  f << "x1,x2,y\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double a = lorf::uniform01(rng) + shift, b = lorf::uniform01(rng);
    f << a << ',' << b << ',' << 2.0 * a - b + 0.1 * lorf::uniform01(rng) << '\n';
  }
}

}  // namespace

TEST_CASE("fit is reproducible and predict emits mean and quantile columns") {
  TempDir dir;
  write_csv(dir / "train.csv", 1, 120, 0.0);
  write_csv(dir / "test.csv", 2, 30, 0.3);
  const std::vector<std::string> fit{"fit", "--train", dir / "train.csv", "--test", dir / "test.csv",
                                     "--trees", "15", "--seed", "9", "--out", dir / "m1.json"};
  REQUIRE(run(fit).code == 0);
  auto fit2 = fit;
  fit2.back() = dir / "m2.json";
  REQUIRE(run(fit2).code == 0);
  CHECK(slurp(dir / "m1.json") == slurp(dir / "m2.json"));
  CHECK(fs::exists(dir / "m1.json.manifest.json"));

  const auto pred = run({"predict", "--model", dir / "m1.json", "--data", dir / "test.csv"});
  REQUIRE(pred.code == 0);
  std::istringstream lines(pred.out);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "mean,q0.1,q0.5,q0.9");
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 30);
}

TEST_CASE("density-ratio, tune and eval subcommands run end to end") {
  TempDir dir;
  write_csv(dir / "train.csv", 3, 100, 0.0);
  write_csv(dir / "test.csv", 4, 40, 0.2);
  REQUIRE(run({"density-ratio", "--train", dir / "train.csv", "--test", dir / "test.csv", "--response", "y",
               "--out", dir / "w.csv"})
              .code == 0);
  CHECK(slurp(dir / "w.csv").rfind("row,raw_weight,regularized_weight\n", 0) == 0);
  REQUIRE(run({"tune", "--train", dir / "train.csv", "--weights", dir / "w.csv", "--mtry-grid", "1,2",
               "--trees", "10", "--out", dir / "tune.csv"})
              .code == 0);
  REQUIRE(run({"fit", "--train", dir / "train.csv", "--weights", dir / "w.csv", "--trees", "10", "--out",
               dir / "m.json"})
              .code == 0);
  REQUIRE(run({"predict", "--model", dir / "m.json", "--data", dir / "test.csv", "--out", dir / "p.csv"})
              .code == 0);
  const auto ev = run({"eval", "--pred", dir / "p.csv", "--truth", dir / "test.csv"});
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("\"score\"") != std::string::npos);
}

TEST_CASE("simulate writes one row per cell and method") {
  TempDir dir;
  const auto r = run({"simulate", "--models", "1", "--lambdas", "1.0,1.5", "--reps", "2", "--n-train", "120",
                      "--n-test", "40", "--trees", "10", "--seed", "3", "--out", dir / "sim.csv"});
  REQUIRE(r.code == 0);
  std::istringstream lines(slurp(dir / "sim.csv"));
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 5);  // header + 2 lambdas x 2 methods
}

TEST_CASE("exit codes") {
  CHECK(run({"--version"}).code == 0);
  CHECK(run({"fit"}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"predict", "--model", "/nonexistent.json", "--data", "/nonexistent.csv"}).code == 2);
  TempDir dir;
  {
    std::ofstream f(dir / "bad.csv");
    f << "x1,y\n1,abc\n";
  }
  const auto r = run({"fit", "--train", dir / "bad.csv", "--out", dir / "m.json"});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
}
