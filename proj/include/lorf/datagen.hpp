#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>

#include "lorf/dataset.hpp"

namespace lorf {

/// Number of covariates in the Dirichlet shift design: six Dirichlet
/// coordinates followed by 25 independent uniforms.
inline constexpr std::size_t kDirichletDims = 6;
inline constexpr std::size_t kShiftBenchmarkDims = 31;

struct ShiftBenchmarkSpec {
  double lambda_shift = 1.0;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  int model_id = 1;
  double noise_sd = 0.5;  // E(eps^2) = 0.25
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Role { kTrain, kTest };

/// Dirichlet concentration for a role: lambda^(1..6) for training,
/// lambda^(6..1) for test.
std::array<double, kDirichletDims> dirichlet_alpha(double lambda_shift, Role role);

/// Noise-free conditional mean of the five benchmark response models.
/// `x` must have at least six coordinates.
double benchmark_mean(int model_id, std::span<const double> x);

/// Draws one side of the Dirichlet covariate-shift benchmark. Train and
/// test use independent streams of `spec.seed`, so the same spec yields a
/// matched pair.
Dataset generate_dirichlet_shift(const ShiftBenchmarkSpec& spec, Role role);

/// Smooth signal with local structure:
/// max{ s(x) sin x, s(-x) sin(-x) } with s the logistic function.
double univariate_signal(double x);

struct UnivariateShiftOptions {
  double train_mean = -4.0;
  double train_sd = 3.5;
  double test_mean = 3.5;
  double test_sd = 1.5;
  double noise_variance = 0.5;
};

struct UnivariateShift {
  Dataset train;
  Dataset test;
  /// Exact test/train covariate density ratio.
  std::function<double(double)> oracle_ratio;
};

UnivariateShift generate_univariate_shift(std::size_t n_train, std::size_t n_test,
                                          std::uint64_t seed,
                                          const UnivariateShiftOptions& options = {});

}  // namespace lorf
