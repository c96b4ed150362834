#include "lorf/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>

#include "lorf/datagen.hpp"
#include "lorf/dataset.hpp"
#include "lorf/density_ratio.hpp"
#include "lorf/error.hpp"
#include "lorf/parallel.hpp"
#include "lorf/rng.hpp"

namespace lorf {

double composite_score(double mae, double rmse, double interval_width, double coverage,
                       double alpha_level) {
  if (!(mae > 0.0) || !(rmse > 0.0) || !(interval_width > 0.0))
    return std::numeric_limits<double>::infinity();
  return (1.0 / mae + 1.0 / rmse + 4.0 / interval_width) * coverage / (1.0 - alpha_level);
}

MetricsReport metrics_from_components(double rmse, double mae, double coverage,
                                      double interval_width, double alpha_level) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw ConfigError("alpha level must lie in (0, 1)");
  MetricsReport r;
  r.rmse = rmse;
  r.mae = mae;
  r.coverage = coverage;
  r.interval_width = interval_width;
  r.alpha_level = alpha_level;
  r.score = composite_score(mae, rmse, interval_width, coverage, alpha_level);
  r.score_infinite = std::isinf(r.score);
  return r;
}

MetricsReport compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                              std::span<const double> lo, std::span<const double> hi,
                              double alpha_level) {
  const std::size_t n = y_true.size();
  if (n == 0) throw ConfigError("metrics need at least one observation");
  if (y_pred.size() != n || lo.size() != n || hi.size() != n)
    throw DimensionError("metric inputs must have equal lengths");
  double se = 0.0;
  double ae = 0.0;
  double width = 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lo[i] > hi[i]) throw DomainError("interval lower bound exceeds upper bound");
    const double e = y_pred[i] - y_true[i];
    se += e * e;
    ae += std::abs(e);
    width += hi[i] - lo[i];
    if (lo[i] <= y_true[i] && y_true[i] <= hi[i]) ++covered;
  }
  const auto dn = static_cast<double>(n);
  auto r = metrics_from_components(std::sqrt(se / dn), ae / dn, static_cast<double>(covered) / dn,
                                   width / dn, alpha_level);
  r.count = n;
  return r;
}

MetricsReport average_reports(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw ConfigError("nothing to average");
  double rmse = 0.0, mae = 0.0, cov = 0.0, width = 0.0;
  std::size_t count = 0;
  for (const auto& r : reports) {
    rmse += r.rmse;
    mae += r.mae;
    cov += r.coverage;
    width += r.interval_width;
    count += r.count;
  }
  const auto k = static_cast<double>(reports.size());
  auto out = metrics_from_components(rmse / k, mae / k, cov / k, width / k, reports.front().alpha_level);
  out.count = count;
  return out;
}

// --- Dirichlet shift simulation ---------------------------------------------

SimulationConfig::SimulationConfig() {
  weighted_controls.n_trees = 500;
  weighted_controls.mtry = kShiftBenchmarkDims;
  weighted_controls.nodesize = 7;
  weighted_controls.min_split = 20;
  weighted_controls.complexity = 0.01;
  weighted_controls.sample_fraction = 0.6;
  weighted_controls.with_replacement = false;

  unweighted_controls.n_trees = 500;
  unweighted_controls.mtry = 5;  // floor(sqrt(31))
  unweighted_controls.nodesize = 5;
  unweighted_controls.sample_fraction = 0.6;
  unweighted_controls.with_replacement = false;
}

void SimulationConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (model_ids.empty() || lambda_grid.empty()) throw ConfigError("empty model or lambda grid");
  for (int m : model_ids)
    if (m < 1 || m > 5) throw ConfigError("model ids must lie in 1..5");
  for (double l : lambda_grid)
    if (!(l > 0.0)) throw ConfigError("lambda values must be > 0");
  if (!(lower_level > 0.0 && lower_level < upper_level && upper_level < 1.0))
    throw ConfigError("interval levels must satisfy 0 < lower < upper < 1");
  if (!(n0_fraction > 0.0 && n0_fraction < 1.0)) throw ConfigError("n0 fraction must lie in (0, 1)");
  weighted_controls.resolved(kShiftBenchmarkDims).validate(kShiftBenchmarkDims);
  unweighted_controls.resolved(kShiftBenchmarkDims).validate(kShiftBenchmarkDims);
}

namespace {

MetricsReport evaluate_forest(const WeightedForest& forest, const Dataset& test, double lower,
                              double upper, double alpha_level) {
  const std::size_t n = test.n();
  std::vector<double> mean(n), lo(n), hi(n);
  const double levels[] = {lower, upper};
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = test.features.row(i);
    mean[i] = predict_mean(forest, x);
    const auto q = conditional_quantiles(forest, x, levels);
    lo[i] = q[0];
    hi[i] = q[1];
  }
  return compute_metrics(*test.response, mean, lo, hi, alpha_level);
}

std::uint64_t cell_index(std::size_t model_pos, std::size_t lambda_pos, std::size_t rep) {
  return (static_cast<std::uint64_t>(model_pos) << 40) ^ (static_cast<std::uint64_t>(lambda_pos) << 24) ^
         static_cast<std::uint64_t>(rep);
}

}  // namespace

ReplicationOutcome run_replication(const SimulationConfig& config, int model_id,
                                   double lambda_shift, std::uint64_t replication_seed) {
  ShiftBenchmarkSpec spec;
  spec.lambda_shift = lambda_shift;
  spec.n_train = config.n_train;
  spec.n_test = config.n_test;
  spec.model_id = model_id;
  spec.noise_sd = config.noise_sd;
  spec.seed = replication_seed;
  const auto train = generate_dirichlet_shift(spec, Role::kTrain);
  const auto test = generate_dirichlet_shift(spec, Role::kTest);

  const auto ratio = ulsif_fit(train.features, test.features, replication_seed);
  auto weights =
      ImportanceWeights::regularized(ulsif_predict(ratio, train.features), config.n0_fraction);

  auto weighted_controls = config.weighted_controls;
  weighted_controls.seed = derive_seed(replication_seed, Stream::kTree, 1);
  weighted_controls.threads = 1;
  auto unweighted_controls = config.unweighted_controls;
  unweighted_controls.seed = derive_seed(replication_seed, Stream::kTree, 2);
  unweighted_controls.threads = 1;

  const auto weighted =
      fit_forest(train.features, *train.response, weights.effective, weighted_controls);
  const auto unweighted = fit_forest(train.features, *train.response, {}, unweighted_controls);

  ReplicationOutcome out;
  out.weighted = evaluate_forest(weighted, test, config.lower_level, config.upper_level, config.alpha_level);
  out.unweighted =
      evaluate_forest(unweighted, test, config.lower_level, config.upper_level, config.alpha_level);
  out.n_eff = weights.n_eff;
  out.smoothing_exponent = weights.smoothing_exponent;
  return out;
}

std::vector<SimulationResult> run_simulation_study(const SimulationConfig& config) {
  config.validate();
  struct Job {
    std::size_t cell;
    int model_id;
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::vector<SimulationResult> results;
  for (std::size_t mi = 0; mi < config.model_ids.size(); ++mi) {
    for (std::size_t li = 0; li < config.lambda_grid.size(); ++li) {
      SimulationResult cell;
      cell.model_id = config.model_ids[mi];
      cell.lambda_shift = config.lambda_grid[li];
      for (std::size_t r = 0; r < config.replications; ++r)
        jobs.push_back({results.size(), cell.model_id, cell.lambda_shift,
                        derive_seed(config.seed, Stream::kReplication, cell_index(mi, li, r))});
      results.push_back(std::move(cell));
    }
  }

  std::vector<std::optional<ReplicationOutcome>> outcomes(jobs.size());
  std::mutex log_mutex;
  parallel_for(jobs.size(), config.threads, [&](std::size_t j) {
    try {
      outcomes[j] = run_replication(config, jobs[j].model_id, jobs[j].lambda, jobs[j].seed);
    } catch (const Error& e) {
      std::lock_guard lock(log_mutex);
      std::cerr << "replication failed (model " << jobs[j].model_id << ", lambda " << jobs[j].lambda
                << "): " << e.what() << '\n';
    }
  });

  std::vector<double> neff_sum(results.size(), 0.0), exponent_sum(results.size(), 0.0);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& cell = results[jobs[j].cell];
    if (!outcomes[j]) {
      ++cell.failed;
      continue;
    }
    cell.weighted_runs.push_back(outcomes[j]->weighted);
    cell.unweighted_runs.push_back(outcomes[j]->unweighted);
    neff_sum[jobs[j].cell] += outcomes[j]->n_eff;
    exponent_sum[jobs[j].cell] += outcomes[j]->smoothing_exponent;
  }
  for (std::size_t c = 0; c < results.size(); ++c) {
    auto& cell = results[c];
    cell.replications = cell.weighted_runs.size();
    if (cell.replications == 0) continue;
    cell.weighted = average_reports(cell.weighted_runs);
    cell.unweighted = average_reports(cell.unweighted_runs);
    cell.mean_n_eff = neff_sum[c] / static_cast<double>(cell.replications);
    cell.mean_smoothing_exponent = exponent_sum[c] / static_cast<double>(cell.replications);
  }
  return results;
}

std::string format_results_csv(std::span<const SimulationResult> results) {
  std::ostringstream out;
  out << "model,lambda,method,rmse,mae,covg,int_width,score\n";
  auto row = [&](const SimulationResult& r, const char* method, const MetricsReport& m) {
    out << r.model_id << ',' << format_double(r.lambda_shift) << ',' << method << ','
        << format_double(m.rmse) << ',' << format_double(m.mae) << ',' << format_double(m.coverage)
        << ',' << format_double(m.interval_width) << ',' << format_double(m.score) << '\n';
  };
  for (const auto& r : results) {
    if (r.replications == 0) continue;
    row(r, "weighted", r.weighted);
    row(r, "unweighted", r.unweighted);
  }
  return out.str();
}

void write_results_csv(std::span<const SimulationResult> results, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << format_results_csv(results);
}

std::vector<ResultsRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 0);
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"model", "lambda", "method", "rmse",
                                          "mae",   "covg",   "int_width", "score"};
  if (header != expected) throw ParseError("unexpected results header", 0);
  std::vector<ResultsRow> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_no;
    const auto f = split_csv_line(line);
    if (f.size() != expected.size()) throw ParseError("wrong field count", row_no);
    try {
      ResultsRow r;
      r.model_id = std::stoi(f[0]);
      r.lambda_shift = std::stod(f[1]);
      r.method = f[2];
      r.metrics = metrics_from_components(std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                                          std::stod(f[6]));
      r.metrics.score = std::stod(f[7]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError("non-numeric field", row_no);
    }
  }
  return rows;
}

// --- univariate shift illustration -----------------------------------------

UnivariateStudyConfig::UnivariateStudyConfig() {
  unweighted_controls.n_trees = 500;
  unweighted_controls.mtry = 1;
  unweighted_controls.nodesize = 5;
  unweighted_controls.sample_fraction = 0.6;
  unweighted_controls.with_replacement = false;

  weighted_controls = unweighted_controls;
  weighted_controls.nodesize = 7;
  weighted_controls.min_split = 20;
  weighted_controls.complexity = 0.01;
}

UnivariateStudyResult run_univariate_study(const UnivariateStudyConfig& config) {
  if (config.runs < 1) throw ConfigError("runs must be >= 1");
  UnivariateStudyResult result;
  result.runs.resize(config.runs);
  parallel_for(config.runs, config.threads, [&](std::size_t r) {
    const auto seed = derive_seed(config.seed, Stream::kReplication, r);
    const auto data = generate_univariate_shift(config.n_train, config.n_test, seed, config.data);
    const auto& x = data.train.features;
    const auto& y = *data.train.response;

    const auto model = ulsif_fit(x, data.test.features, seed);
    auto raw = ulsif_predict(model, x);
    const auto learned = config.n0_fraction > 0.0
                             ? ImportanceWeights::regularized(std::move(raw), config.n0_fraction)
                             : ImportanceWeights::unsmoothed(std::move(raw));
    std::vector<double> oracle(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) oracle[i] = data.oracle_ratio(x(i, 0));

    auto weighted = config.weighted_controls;
    auto unweighted = config.unweighted_controls;
    weighted.threads = unweighted.threads = 1;
    weighted.seed = unweighted.seed = derive_seed(seed, Stream::kTree);
    auto rmse = [&](const WeightedForest& f) {
      double se = 0.0;
      for (std::size_t i = 0; i < data.test.n(); ++i) {
        const double xi = data.test.features(i, 0);
        const double e = predict_mean(f, data.test.features.row(i)) - univariate_signal(xi);
        se += e * e;
      }
      return std::sqrt(se / static_cast<double>(data.test.n()));
    };
    auto& run = result.runs[r];
    run.rmse_unweighted = rmse(fit_forest(x, y, {}, unweighted));
    run.rmse_learned = rmse(fit_forest(x, y, learned.effective, weighted));
    run.rmse_oracle = rmse(fit_forest(x, y, oracle, weighted));
  });
  for (const auto& run : result.runs) {
    result.mean.rmse_unweighted += run.rmse_unweighted;
    result.mean.rmse_learned += run.rmse_learned;
    result.mean.rmse_oracle += run.rmse_oracle;
  }
  const auto k = static_cast<double>(result.runs.size());
  result.mean.rmse_unweighted /= k;
  result.mean.rmse_learned /= k;
  result.mean.rmse_oracle /= k;
  return result;
}

// --- density-ratio comparison ------------------------------------------------

RatioComparison run_ratio_comparison(std::uint64_t seed, std::size_t n, std::size_t threads) {
  constexpr double kTrainSd = 2.5, kTestMean = 0.5, kTestSd = 0.95;
  auto draw = [&](Stream stream, double mean, double sd) {
    auto rng = make_rng(seed, stream);
    std::normal_distribution<double> dist(mean, sd);
    Matrix x(n, 1);
    for (std::size_t i = 0; i < n; ++i) x(i, 0) = dist(rng);
    return x;
  };
  const Matrix train = draw(Stream::kDataTrain, 0.0, kTrainSd);
  const Matrix test = draw(Stream::kDataTest, kTestMean, kTestSd);

  constexpr std::size_t kGrid = 512;
  Matrix grid(kGrid, 1);
  std::vector<double> truth(kGrid);
  for (std::size_t g = 0; g < kGrid; ++g) {
    const double x = -8.0 + 16.0 * static_cast<double>(g) / static_cast<double>(kGrid - 1);
    grid(g, 0) = x;
    const double zt = (x - kTestMean) / kTestSd;
    const double zr = x / kTrainSd;
    truth[g] = (kTrainSd / kTestSd) * std::exp(-0.5 * zt * zt + 0.5 * zr * zr);
  }
  auto rmse = [&](const std::vector<double>& est) {
    double se = 0.0;
    for (std::size_t g = 0; g < kGrid; ++g) se += (est[g] - truth[g]) * (est[g] - truth[g]);
    return std::sqrt(se / static_cast<double>(kGrid));
  };

  RatioComparison out;
  out.ulsif_rmse = rmse(ulsif_predict(ulsif_fit(train, test, seed), grid));
  ClassifierRatioConfig cfg;
  cfg.threads = threads;
  out.classifier_rmse = rmse(classifier_ratio_fit(train, test, cfg, seed).predict(grid));
  return out;
}

// --- out-of-bag error under shift -------------------------------------------

OobShiftTrial run_oob_shift_trial(int model_id, double lambda_shift, std::uint64_t seed,
                                  const ForestControls& controls, double n0_fraction,
                                  std::size_t n_test) {
  ShiftBenchmarkSpec spec;
  spec.model_id = model_id;
  spec.lambda_shift = lambda_shift;
  spec.n_test = n_test;
  spec.seed = seed;
  const auto train = generate_dirichlet_shift(spec, Role::kTrain);
  const auto test = generate_dirichlet_shift(spec, Role::kTest);
  const auto ratio = ulsif_fit(train.features, test.features, seed);
  const auto weights =
      ImportanceWeights::regularized(ulsif_predict(ratio, train.features), n0_fraction);

  auto c = controls;
  c.seed = derive_seed(seed, Stream::kTree);
  const auto forest = fit_forest(train.features, *train.response, weights.effective, c);

  OobShiftTrial out;
  out.weighted_oob =
      oob_error(forest, train.features, *train.response, OobMode::kWeighted, weights.effective).error;
  out.uniform_oob = oob_error(forest, train.features, *train.response, OobMode::kUniform).error;
  double se = 0.0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    const double e = predict_mean(forest, test.features.row(i)) - (*test.response)[i];
    se += e * e;
  }
  out.test_mse = se / static_cast<double>(test.n());
  return out;
}

}  // namespace lorf
