#include <doctest.h>

#include <cmath>
#include <random>

#include "lorf/density_ratio.hpp"
#include "lorf/error.hpp"

using namespace lorf;

namespace {

Matrix gaussian_sample(std::uint64_t seed, std::size_t n, double mean, double sd, std::size_t p = 1) {
  Rng rng(seed);
  std::normal_distribution<double> d(mean, sd);
  Matrix x(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x(i, j) = d(rng);
  return x;
}

}  // namespace

TEST_CASE("effective sample size examples") {
  CHECK(effective_sample_size(std::vector<double>{1, 1, 1, 1}) == 4.0);
  CHECK(effective_sample_size(std::vector<double>{0, 0, 1, 0}) == 1.0);
  CHECK(effective_sample_size(std::vector<double>{1, 4}) == doctest::Approx(25.0 / 17.0));
  CHECK(effective_sample_size(std::vector<double>{1, 4}) == doctest::Approx(1.470588).epsilon(1e-6));
  CHECK(effective_sample_size(std::vector<double>{3, 12}) == doctest::Approx(25.0 / 17.0));
  CHECK_THROWS_AS(effective_sample_size(std::vector<double>{0, 0}), DomainError);
}

TEST_CASE("smoothing exponent examples") {
  const std::vector<double> uniform(10, 2.0);
  CHECK(solve_smoothing_exponent(uniform, 5.0).exponent == 1.0);
  CHECK(solve_smoothing_exponent(std::vector<double>{1, 4}, 25.0 / 17.0).exponent == 1.0);

  const auto sol = solve_smoothing_exponent(std::vector<double>{1, 100}, 1.9);
  const double l = sol.exponent;
  const double neff = std::pow(1.0 + std::pow(100.0, l), 2) / (1.0 + std::pow(100.0, 2.0 * l));
  CHECK(std::abs(neff - 1.9) < 1e-6);
  CHECK(l > 0.0);
  CHECK(l < 1.0);
  CHECK_FALSE(sol.unreachable);
}

TEST_CASE("n_eff of powered weights is nonincreasing in the exponent") {
  Rng rng(4);
  std::lognormal_distribution<double> d(0.0, 1.5);
  std::vector<double> w(300);
  for (auto& v : w) v = d(rng);
  double prev = 1e300;
  for (int k = 1; k <= 100; ++k) {
    std::vector<double> p(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) p[i] = std::pow(w[i], 0.01 * k);
    const double ne = effective_sample_size(p);
    CHECK(ne <= prev + 1e-9);
    prev = ne;
  }
}

TEST_CASE("unreachable targets are flagged") {
  // Zero weights never gain mass under powering, so n_eff stays at most 2.
  const std::vector<double> w{0, 0, 0, 1, 5};
  const auto sol = solve_smoothing_exponent(w, 4.0);
  CHECK(sol.unreachable);
  CHECK(sol.exponent > 0.0);
  CHECK_THROWS_AS(solve_smoothing_exponent(w, 0.5), ConfigError);
}

TEST_CASE("regularized importance weights hit the target") {
  Rng rng(5);
  std::lognormal_distribution<double> d(0.0, 2.0);
  std::vector<double> w(500);
  for (auto& v : w) v = d(rng);
  const auto iw = ImportanceWeights::regularized(w, 0.75);
  CHECK(std::abs(iw.n_eff - 375.0) <= 1e-6 * 500);
  CHECK(std::abs(effective_sample_size(iw.effective) - 375.0) <= 1e-6 * 500);
  CHECK(iw.raw == w);
  const auto none = ImportanceWeights::unsmoothed(w);
  CHECK(none.effective == w);
}

TEST_CASE("uLSIF predictions from hand-built models") {
  UlsifModel m;
  m.centroids = Matrix(1, 2, 0.5);
  m.coefficients = {1.0};
  m.bandwidth = 0.7;
  CHECK(ulsif_predict(m, Matrix(1, 2, 0.5))[0] == 1.0);
  m.coefficients = {0.0};
  CHECK(ulsif_predict(m, Matrix(3, 2, 0.1)) == std::vector<double>(3, 0.0));
  m.coefficients = {-1.0};
  CHECK(ulsif_predict(m, Matrix(3, 2, 0.9)) == std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(ulsif_predict(m, Matrix(1, 3, 0.0)), DimensionError);
}

TEST_CASE("uLSIF prediction is invariant to centroid order") {
  UlsifModel a;
  a.centroids = Matrix(3, 1);
  a.centroids(0, 0) = -1.0;
  a.centroids(1, 0) = 0.5;
  a.centroids(2, 0) = 2.0;
  a.coefficients = {0.3, 1.2, -0.2};
  a.bandwidth = 0.8;
  UlsifModel b = a;
  b.centroids(0, 0) = 2.0;
  b.centroids(2, 0) = -1.0;
  b.coefficients = {-0.2, 1.2, 0.3};
  const Matrix q = gaussian_sample(1, 20, 0.0, 1.0);
  const auto pa = ulsif_predict(a, q), pb = ulsif_predict(b, q);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-14));
}

TEST_CASE("single-centroid uLSIF solves the scalar system") {
  Matrix train(2, 1), test(1, 1);
  train(0, 0) = 0.0;
  train(1, 0) = 1.0;
  test(0, 0) = 0.4;
  const double sigma = 0.9, ridge = 0.05;
  const std::vector<double> sg{sigma}, rg{ridge};
  const auto model = ulsif_fit(train, test, sg, rg, 1, 3);
  auto k = [&](double a, double b) { return std::exp(-(a - b) * (a - b) / (2 * sigma * sigma)); };
  const double h_mat = (k(0.0, 0.4) * k(0.0, 0.4) + k(1.0, 0.4) * k(1.0, 0.4)) / 2.0;
  const double h_vec = 1.0;
  REQUIRE(model.coefficients.size() == 1);
  CHECK(model.coefficients[0] == doctest::Approx(h_vec / (h_mat + ridge)).epsilon(1e-13));
}

TEST_CASE("uLSIF on identical samples gives nearly constant weights") {
  const Matrix x = gaussian_sample(6, 400, 0.0, 1.0, 2);
  const auto model = ulsif_fit(x, x, 6);
  const auto w = ulsif_predict(model, x);
  double s = 0.0, ss = 0.0;
  for (double v : w) {
    s += v;
    ss += v * v;
  }
  const double mean = s / 400.0;
  const double cv = std::sqrt(ss / 400.0 - mean * mean) / mean;
  CHECK(cv < 0.2);
  CHECK(effective_sample_size(w) / 400.0 >= 0.9);
}

TEST_CASE("uLSIF recovers a Gaussian density ratio") {
  const Matrix train = gaussian_sample(7, 1500, 0.0, 2.5);
  const Matrix test = gaussian_sample(8, 1500, 0.5, 0.95);
  const auto model = ulsif_fit(train, test, 7);
  double se = 0.0;
  for (int g = 0; g < 512; ++g) {
    const double x = -8.0 + 16.0 * g / 511.0;
    const double zt = (x - 0.5) / 0.95, zr = x / 2.5;
    const double truth = (2.5 / 0.95) * std::exp(-0.5 * zt * zt + 0.5 * zr * zr);
    const double est = ulsif_predict(model, Matrix(1, 1, x))[0];
    se += (est - truth) * (est - truth);
  }
  CHECK(std::sqrt(se / 512.0) <= 0.25);
}

TEST_CASE("uLSIF input validation") {
  const Matrix a = gaussian_sample(1, 10, 0.0, 1.0), b = gaussian_sample(2, 10, 0.0, 1.0, 2);
  CHECK_THROWS_AS(ulsif_fit(a, b, 1), DimensionError);
  const std::vector<double> empty;
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(ulsif_fit(a, a, empty, one, 10, 1), ConfigError);
  const auto grid = default_bandwidth_grid(a, a, 1);
  CHECK(grid.size() == 10);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
}

TEST_CASE("classifier odds transform") {
  ClassifierRatio r;
  r.delta = 1e-12;
  r.prior_factor = 1.0;
  CHECK(r.odds_to_ratio(0.5) == doctest::Approx(1.0));
  r.delta = 0.0;
  CHECK(r.odds_to_ratio(0.75) == doctest::Approx(3.0));
}

TEST_CASE("classifier weights are strictly positive") {
  const Matrix train = gaussian_sample(9, 200, 0.0, 2.0);
  const Matrix test = gaussian_sample(10, 100, 1.0, 0.5);
  ClassifierRatioConfig cfg;
  cfg.n_trees = 50;
  const auto fit = classifier_ratio_fit(train, test, cfg, 3);
  REQUIRE(fit.train_weights.size() == 200);
  for (double w : fit.train_weights) CHECK(w > 0.0);
  CHECK(fit.prior_factor == 2.0);
}
