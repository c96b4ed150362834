#include "lorf/datagen.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lorf/error.hpp"
#include "lorf/rng.hpp"

namespace lorf {

void ShiftBenchmarkSpec::validate() const {
  if (!(lambda_shift > 0.0) || !std::isfinite(lambda_shift))
    throw ConfigError("lambda_shift must be > 0");
  if (n_train < 1 || n_test < 1) throw ConfigError("n_train and n_test must be positive");
  if (model_id < 1 || model_id > 5) throw ConfigError("model_id must be in 1..5");
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
}

std::array<double, kDirichletDims> dirichlet_alpha(double lambda_shift, Role role) {
  std::array<double, kDirichletDims> alpha{};
  for (std::size_t k = 0; k < kDirichletDims; ++k) {
    const double power = role == Role::kTrain ? static_cast<double>(k + 1)
                                              : static_cast<double>(kDirichletDims - k);
    alpha[k] = std::pow(lambda_shift, power);
  }
  return alpha;
}

double benchmark_mean(int model_id, std::span<const double> x) {
  using std::numbers::pi;
  switch (model_id) {
    case 1:
      return 5.0 * x[0];
    case 2:
      return 5.0 * std::sin(pi * x[0]);
    case 3:
      return 10.0 * std::sin(pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
             10.0 * x[3] + 5.0 * x[4];
    case 4:
      return 5.0 * std::exp(2.0 * std::sqrt(x[0] * x[1]) + x[5]);
    case 5: {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s += x[j] * x[j];
      return 5.0 * s;
    }
    default:
      throw ConfigError("model_id must be in 1..5");
  }
}

Dataset generate_dirichlet_shift(const ShiftBenchmarkSpec& spec, Role role) {
  spec.validate();
  const std::size_t n = role == Role::kTrain ? spec.n_train : spec.n_test;
  auto rng = make_rng(spec.seed, role == Role::kTrain ? Stream::kDataTrain : Stream::kDataTest);
  const auto alpha = dirichlet_alpha(spec.lambda_shift, role);

  std::array<std::gamma_distribution<double>, kDirichletDims> gammas;
  for (std::size_t k = 0; k < kDirichletDims; ++k)
    gammas[k] = std::gamma_distribution<double>(alpha[k], 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Matrix x(n, kShiftBenchmarkDims);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    double total = 0.0;
    for (std::size_t k = 0; k < kDirichletDims; ++k) {
      row[k] = gammas[k](rng);
      total += row[k];
    }
    for (std::size_t k = 0; k < kDirichletDims; ++k) row[k] /= total;
    for (std::size_t k = kDirichletDims; k < kShiftBenchmarkDims; ++k) row[k] = uniform01(rng);
    y[i] = benchmark_mean(spec.model_id, row) + spec.noise_sd * noise(rng);
  }
  return Dataset::from_matrix(std::move(x), std::move(y));
}

double univariate_signal(double x) {
  auto logistic = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  return std::max(logistic(x) * std::sin(x), logistic(-x) * std::sin(-x));
}

UnivariateShift generate_univariate_shift(std::size_t n_train, std::size_t n_test,
                                          std::uint64_t seed,
                                          const UnivariateShiftOptions& opt) {
  if (n_train < 1 || n_test < 1) throw ConfigError("sample sizes must be positive");
  if (!(opt.train_sd > 0.0) || !(opt.test_sd > 0.0) || !(opt.noise_variance >= 0.0))
    throw ConfigError("invalid univariate shift options");
  const double noise_sd = std::sqrt(opt.noise_variance);

  auto draw = [&](std::size_t n, double mean, double sd, Stream stream) {
    auto rng = make_rng(seed, stream);
    std::normal_distribution<double> cov(mean, sd);
    std::normal_distribution<double> eps(0.0, 1.0);
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = cov(rng);
      y[i] = univariate_signal(x(i, 0)) + noise_sd * eps(rng);
    }
    return Dataset::from_matrix(std::move(x), std::move(y));
  };

  UnivariateShift out;
  out.train = draw(n_train, opt.train_mean, opt.train_sd, Stream::kDataTrain);
  out.test = draw(n_test, opt.test_mean, opt.test_sd, Stream::kDataTest);
  out.oracle_ratio = [opt](double x) {
    const double zt = (x - opt.test_mean) / opt.test_sd;
    const double zr = (x - opt.train_mean) / opt.train_sd;
    return (opt.train_sd / opt.test_sd) * std::exp(-0.5 * zt * zt + 0.5 * zr * zr);
  };
  return out;
}

}  // namespace lorf
