#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lorf/forest.hpp"
#include "lorf/matrix.hpp"

namespace lorf {

/// Gaussian-kernel linear model of the test/train density ratio:
/// w(x) = max(0, sum_k coefficients[k] * exp(-|x - c_k|^2 / (2 bandwidth^2))).
struct UlsifModel {
  Matrix centroids;
  std::vector<double> coefficients;
  double bandwidth = 1.0;
  double ridge = 0.0;
  double cv_score = 0.0;  // leave-one-out score of the selected pair

  void validate() const;
};

/// Bandwidths: `count` log-spaced values between the 10th and 90th
/// percentiles of pairwise distances over (a subsample of) both samples.
std::vector<double> default_bandwidth_grid(const Matrix& train_x, const Matrix& test_x,
                                           std::uint64_t seed, std::size_t count = 10);

/// Ridge penalties 1e-3, 1e-2, ..., 1e1.
std::vector<double> default_ridge_grid();

/// Least-squares importance fit. Centroids are a uniform subsample of the
/// test rows; for each (bandwidth, ridge) pair the analytic leave-one-out
/// score is computed and the minimizer (ties: smaller bandwidth, then larger
/// ridge) is refit on all rows by solving (H + ridge I) a = h.
UlsifModel ulsif_fit(const Matrix& train_x, const Matrix& test_x,
                     std::span<const double> bandwidth_grid, std::span<const double> ridge_grid,
                     std::size_t max_centroids, std::uint64_t seed);

/// ulsif_fit with the default grids and 100 centroids.
UlsifModel ulsif_fit(const Matrix& train_x, const Matrix& test_x, std::uint64_t seed);

std::vector<double> ulsif_predict(const UlsifModel& model, const Matrix& x);

/// (sum w)^2 / sum w^2. Throws DomainError when no weight is positive.
double effective_sample_size(std::span<const double> weights);

struct SmoothingExponent {
  double exponent = 1.0;
  double n_eff = 0.0;
  /// The target was not reachable on (0, 1]; `exponent` is the boundary.
  bool unreachable = false;
};

/// Finds the power lambda in (0, 1] with n_eff(w^lambda) = n0 by bisection
/// (tolerance 1e-6 * n, at most 200 steps, then a 1e-3 grid). Returns 1 when
/// the raw weights already reach n0.
SmoothingExponent solve_smoothing_exponent(std::span<const double> weights, double n0);

/// Raw weights together with their power-smoothed version.
struct ImportanceWeights {
  std::vector<double> raw;
  double smoothing_exponent = 1.0;
  std::vector<double> effective;
  double n_eff = 0.0;
  bool target_unreachable = false;

  /// No smoothing: effective == raw.
  static ImportanceWeights unsmoothed(std::vector<double> raw);
  /// Smooths toward n_eff = n0_fraction * n.
  static ImportanceWeights regularized(std::vector<double> raw, double n0_fraction);
  static ImportanceWeights with_exponent(std::vector<double> raw, double exponent);
};

struct ClassifierRatioConfig {
  double delta = 1e-2;
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 -> ceil(p / 3)
  std::size_t nodesize = 10;
  double sample_fraction = 1.0;
  bool with_replacement = true;
  std::size_t threads = 1;

  void validate() const;
};

/// Ratio estimate from a train-vs-test membership forest. The class-prior
/// factor n_train / n_test turns the membership odds into the density ratio.
struct ClassifierRatio {
  WeightedForest forest;
  double delta = 1e-2;
  double prior_factor = 1.0;
  std::vector<double> train_weights;  // from out-of-bag membership probabilities

  double odds_to_ratio(double probability) const;
  std::vector<double> predict(const Matrix& x) const;
};

ClassifierRatio classifier_ratio_fit(const Matrix& train_x, const Matrix& test_x,
                                     const ClassifierRatioConfig& config, std::uint64_t seed);

}  // namespace lorf
