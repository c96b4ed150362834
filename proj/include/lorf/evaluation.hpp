#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lorf/datagen.hpp"
#include "lorf/forest.hpp"

namespace lorf {

/// Point and interval accuracy of one evaluation run. `alpha_level` is the
/// lower quantile level; the score's coverage factor divides by 1 - alpha.
struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  double coverage = 0.0;
  double interval_width = 0.0;
  double score = 0.0;
  double alpha_level = 0.1;
  bool score_infinite = false;  // a zero MAE, RMSE or width
  std::size_t count = 0;
};

/// (1/MAE + 1/RMSE + 4/width) * coverage / (1 - alpha). Returns +inf when a
/// denominator component is zero.
double composite_score(double mae, double rmse, double interval_width, double coverage,
                       double alpha_level = 0.1);

MetricsReport compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                              std::span<const double> interval_lo,
                              std::span<const double> interval_hi, double alpha_level = 0.1);

/// Builds a report from already-aggregated components (score recomputed).
MetricsReport metrics_from_components(double rmse, double mae, double coverage,
                                      double interval_width, double alpha_level = 0.1);

/// Component-wise mean of several reports, score recomputed from the means.
MetricsReport average_reports(std::span<const MetricsReport> reports);

// --- Dirichlet shift simulation ---------------------------------------------

struct SimulationConfig {
  std::vector<int> model_ids{1, 2, 3, 4, 5};
  std::vector<double> lambda_grid{1.0, 1.071, 1.143, 1.214, 1.286, 1.357, 1.429, 1.5};
  std::size_t replications = 30;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  double noise_sd = 0.5;
  double n0_fraction = 0.75;
  double lower_level = 0.1;
  double upper_level = 0.9;
  double alpha_level = 0.1;
  /// Forest for the importance-weighted arm: every feature eligible at each
  /// split, minimum leaf of 7 rows.
  ForestControls weighted_controls;
  /// Forest for the unweighted arm: mtry = floor(sqrt(p)), leaf of 5 rows.
  ForestControls unweighted_controls;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // parallel over replications

  SimulationConfig();
  void validate() const;
};

struct SimulationResult {
  int model_id = 0;
  double lambda_shift = 1.0;
  std::size_t replications = 0;  // successful replications
  std::size_t failed = 0;
  MetricsReport weighted;    // means over replications
  MetricsReport unweighted;
  double mean_n_eff = 0.0;
  double mean_smoothing_exponent = 1.0;
  std::vector<MetricsReport> weighted_runs;
  std::vector<MetricsReport> unweighted_runs;
};

/// One replication of the benchmark; exposed for tests and diagnostics.
struct ReplicationOutcome {
  MetricsReport weighted;
  MetricsReport unweighted;
  double n_eff = 0.0;
  double smoothing_exponent = 1.0;
};

ReplicationOutcome run_replication(const SimulationConfig& config, int model_id,
                                   double lambda_shift, std::uint64_t replication_seed);

/// Grid over models x lambdas x replications. Failed replications are logged
/// to stderr and excluded; the count is reported per cell.
std::vector<SimulationResult> run_simulation_study(const SimulationConfig& config);

/// Results CSV: model,lambda,method,rmse,mae,covg,int_width,score. Two rows
/// (weighted, unweighted) per cell.
std::string format_results_csv(std::span<const SimulationResult> results);
void write_results_csv(std::span<const SimulationResult> results, const std::filesystem::path& path);

struct ResultsRow {
  int model_id = 0;
  double lambda_shift = 0.0;
  std::string method;
  MetricsReport metrics;
};

std::vector<ResultsRow> parse_results_csv(const std::string& text);

// --- univariate shift illustration -----------------------------------------

struct UnivariateStudyConfig {
  std::size_t runs = 30;
  std::size_t n_train = 500;
  std::size_t n_test = 250;
  UnivariateShiftOptions data;
  ForestControls weighted_controls;    // learned and oracle arms
  ForestControls unweighted_controls;  // baseline arm
  /// Smooth learned weights toward n_eff = n0_fraction * n; 0 disables.
  double n0_fraction = 0.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  UnivariateStudyConfig();
};

struct UnivariateRun {
  double rmse_unweighted = 0.0;
  double rmse_learned = 0.0;
  double rmse_oracle = 0.0;
};

struct UnivariateStudyResult {
  std::vector<UnivariateRun> runs;
  UnivariateRun mean;
};

/// RMSE against the noise-free signal on the test sample, for an unweighted,
/// a uLSIF-weighted and an oracle-weighted forest.
UnivariateStudyResult run_univariate_study(const UnivariateStudyConfig& config);

// --- density-ratio comparison ------------------------------------------------

struct RatioComparison {
  double ulsif_rmse = 0.0;
  double classifier_rmse = 0.0;
};

/// Train N(0, 2.5^2) vs test N(0.5, 0.95^2), n draws each; RMSE of each
/// estimator against the true ratio on 512 equispaced points of [-8, 8].
RatioComparison run_ratio_comparison(std::uint64_t seed, std::size_t n = 1500,
                                     std::size_t threads = 1);

// --- out-of-bag error under shift -------------------------------------------

struct OobShiftTrial {
  double weighted_oob = 0.0;
  double uniform_oob = 0.0;
  double test_mse = 0.0;
};

/// Fits an importance-weighted forest on the benchmark and compares its
/// uniform and weighted OOB errors with the MSE on a fresh test sample.
OobShiftTrial run_oob_shift_trial(int model_id, double lambda_shift, std::uint64_t seed,
                                  const ForestControls& controls, double n0_fraction = 0.75,
                                  std::size_t n_test = 1000);

}  // namespace lorf
