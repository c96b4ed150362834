#include "lorf/density_ratio.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lorf/error.hpp"
#include "lorf/rng.hpp"

namespace lorf {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

/// b x n matrix of kernel values between centroids and the rows of x.
MatrixXd kernel_matrix(const Matrix& centroids, const Matrix& x, double bandwidth) {
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  MatrixXd k(centroids.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < centroids.rows(); ++c)
      k(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) =
          std::exp(scale * squared_distance(centroids.row(c), x.row(i)));
  return k;
}

void check_finite(const Matrix& x, const char* what) {
  for (double v : x.data())
    if (!std::isfinite(v)) throw ConfigError(std::string(what) + " contains non-finite values");
}

double quantile_of_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

void UlsifModel::validate() const {
  if (centroids.rows() < 1) throw ConfigError("uLSIF model needs at least one centroid");
  if (coefficients.size() != centroids.rows()) throw ConfigError("coefficient count mismatch");
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
}

std::vector<double> default_bandwidth_grid(const Matrix& train_x, const Matrix& test_x,
                                           std::uint64_t seed, std::size_t count) {
  constexpr std::size_t kMaxPoints = 400;
  auto rng = make_rng(seed, Stream::kCentroids, 1);
  std::vector<std::span<const double>> pts;
  auto take = [&](const Matrix& m) {
    const std::size_t want = std::min(m.rows(), kMaxPoints / 2);
    for (auto i : draw_resample(rng, m.rows(), want, false)) pts.push_back(m.row(i));
  };
  take(train_x);
  take(test_x);
  std::vector<double> dist;
  dist.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      dist.push_back(std::sqrt(squared_distance(pts[a], pts[b])));
  std::sort(dist.begin(), dist.end());
  if (dist.empty() || !(dist.back() > 0.0)) return {1.0};
  double lo = quantile_of_sorted(dist, 0.1);
  double hi = quantile_of_sorted(dist, 0.9);
  if (!(lo > 0.0)) lo = hi * 1e-2;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return grid;
}

std::vector<double> default_ridge_grid() { return {1e-3, 1e-2, 1e-1, 1e0, 1e1}; }

UlsifModel ulsif_fit(const Matrix& train_x, const Matrix& test_x,
                     std::span<const double> bandwidth_grid, std::span<const double> ridge_grid,
                     std::size_t max_centroids, std::uint64_t seed) {
  if (bandwidth_grid.empty() || ridge_grid.empty()) throw ConfigError("uLSIF grids must be nonempty");
  if (train_x.rows() < 2 && test_x.rows() < 2) throw ConfigError("uLSIF needs at least two rows per sample");
  if (train_x.cols() != test_x.cols()) throw DimensionError("train and test column counts differ");
  if (max_centroids < 1) throw ConfigError("max_centroids must be >= 1");
  for (double s : bandwidth_grid)
    if (!(s > 0.0)) throw ConfigError("bandwidths must be > 0");
  for (double r : ridge_grid)
    if (!(r >= 0.0)) throw ConfigError("ridge penalties must be >= 0");
  check_finite(train_x, "training features");
  check_finite(test_x, "test features");

  const auto n = static_cast<double>(train_x.rows());
  const auto m = static_cast<double>(test_x.rows());
  const std::size_t b = std::min(test_x.rows(), max_centroids);
  auto rng = make_rng(seed, Stream::kCentroids);
  const auto centroid_rows = draw_resample(rng, test_x.rows(), b, false);
  Matrix centroids = test_x.select_rows(centroid_rows);

  std::vector<double> sigmas(bandwidth_grid.begin(), bandwidth_grid.end());
  std::sort(sigmas.begin(), sigmas.end());
  std::vector<double> ridges(ridge_grid.begin(), ridge_grid.end());
  std::sort(ridges.begin(), ridges.end(), std::greater<>());

  // Leave-one-out needs paired held-out points; with fewer than two test
  // rows the grid collapses to its first pair.
  const std::size_t n_min = std::min(train_x.rows(), test_x.rows());
  const bool loo = n_min >= 2 && (sigmas.size() > 1 || ridges.size() > 1);
  const auto bi = static_cast<Eigen::Index>(b);
  const auto nm = static_cast<Eigen::Index>(n_min);

  double best_score = std::numeric_limits<double>::infinity();
  double best_sigma = sigmas.front();
  double best_ridge = ridges.front();
  if (loo) {
    for (double sigma : sigmas) {
      const MatrixXd k_de = kernel_matrix(centroids, train_x, sigma);
      const MatrixXd k_nu = kernel_matrix(centroids, test_x, sigma);
      const MatrixXd h_mat = k_de * k_de.transpose() / n;
      const VectorXd h_vec = k_nu.rowwise().mean();
      const MatrixXd x_de = k_de.leftCols(nm);
      const MatrixXd x_nu = k_nu.leftCols(nm);
      for (double ridge : ridges) {
        MatrixXd system = h_mat;
        system.diagonal().array() += ridge * (n - 1.0) / n;
        Eigen::LDLT<MatrixXd> solver(system);
        if (solver.info() != Eigen::Success) continue;
        const MatrixXd binv_x = solver.solve(x_de);
        const VectorXd binv_h = solver.solve(h_vec);
        const Eigen::RowVectorXd denom =
            (n - x_de.cwiseProduct(binv_x).colwise().sum().array()).matrix();
        const Eigen::RowVectorXd h_term = (h_vec.transpose() * binv_x).array() / denom.array();
        const Eigen::RowVectorXd nu_term =
            x_nu.cwiseProduct(binv_x).colwise().sum().array() / denom.array();
        const MatrixXd b0 = binv_h * Eigen::RowVectorXd::Ones(nm) + binv_x * h_term.asDiagonal();
        const MatrixXd b1 = solver.solve(x_nu) + binv_x * nu_term.asDiagonal();
        const MatrixXd coef = (n - 1.0) * (m * b0 - b1) / (n * (m - 1.0));
        const Eigen::ArrayXd w_de = x_de.cwiseProduct(coef).colwise().sum().transpose().array().max(0.0);
        const Eigen::ArrayXd w_nu = x_nu.cwiseProduct(coef).colwise().sum().transpose().array().max(0.0);
        const double score = w_de.square().mean() / 2.0 - w_nu.mean();
        if (std::isfinite(score) && score < best_score) {
          best_score = score;
          best_sigma = sigma;
          best_ridge = ridge;
        }
      }
    }
    if (!std::isfinite(best_score)) throw NumericalError("uLSIF: every grid point gave a singular system");
  }

  const MatrixXd k_de = kernel_matrix(centroids, train_x, best_sigma);
  const MatrixXd k_nu = kernel_matrix(centroids, test_x, best_sigma);
  MatrixXd system = k_de * k_de.transpose() / n;
  system.diagonal().array() += best_ridge;
  const VectorXd h_vec = k_nu.rowwise().mean();
  Eigen::LDLT<MatrixXd> solver(system);
  if (solver.info() != Eigen::Success || !(solver.rcond() > 1e-14))
    throw NumericalError("uLSIF: singular system after ridge");
  const VectorXd alpha = solver.solve(h_vec);
  if (!alpha.allFinite()) throw NumericalError("uLSIF: non-finite coefficients");

  UlsifModel model;
  model.centroids = std::move(centroids);
  model.coefficients.assign(alpha.data(), alpha.data() + bi);
  model.bandwidth = best_sigma;
  model.ridge = best_ridge;
  model.cv_score = loo ? best_score : std::numeric_limits<double>::quiet_NaN();
  return model;
}

UlsifModel ulsif_fit(const Matrix& train_x, const Matrix& test_x, std::uint64_t seed) {
  const auto sigmas = default_bandwidth_grid(train_x, test_x, seed);
  const auto ridges = default_ridge_grid();
  return ulsif_fit(train_x, test_x, sigmas, ridges, 100, seed);
}

std::vector<double> ulsif_predict(const UlsifModel& model, const Matrix& x) {
  model.validate();
  if (x.cols() != model.centroids.cols())
    throw DimensionError("uLSIF model expects " + std::to_string(model.centroids.cols()) +
                         " columns, got " + std::to_string(x.cols()));
  const double scale = -1.0 / (2.0 * model.bandwidth * model.bandwidth);
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < model.centroids.rows(); ++c)
      s += model.coefficients[c] * std::exp(scale * squared_distance(model.centroids.row(c), x.row(i)));
    out[i] = std::max(0.0, s);
  }
  return out;
}

double effective_sample_size(std::span<const double> weights) {
  double s = 0.0;
  double s2 = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("weights must be >= 0");
    s += w;
    s2 += w * w;
  }
  if (!(s > 0.0)) throw DomainError("effective sample size needs a positive weight");
  return s * s / s2;
}

namespace {

/// n_eff of w^lambda, computed on w / max(w) to stay in range.
double powered_neff(std::span<const double> weights, double wmax, double lambda) {
  double s = 0.0;
  double s2 = 0.0;
  for (double w : weights) {
    if (w <= 0.0) continue;
    const double v = std::exp(lambda * std::log(w / wmax));
    s += v;
    s2 += v * v;
  }
  return s * s / s2;
}

}  // namespace

SmoothingExponent solve_smoothing_exponent(std::span<const double> weights, double n0) {
  const auto n = static_cast<double>(weights.size());
  if (!(n0 > 1.0 && n0 < n)) throw ConfigError("n0 must lie in (1, n)");
  double wmax = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be finite and >= 0");
    wmax = std::max(wmax, w);
  }
  if (!(wmax > 0.0)) throw DomainError("weights are all zero");

  const double tol = 1e-6 * n;
  auto neff = [&](double lambda) { return powered_neff(weights, wmax, lambda); };

  SmoothingExponent out;
  out.n_eff = neff(1.0);
  if (out.n_eff >= n0 - tol) return out;

  constexpr double kLowest = 1e-9;
  const double at_lowest = neff(kLowest);
  if (at_lowest < n0 - tol) {
    out.exponent = kLowest;
    out.n_eff = at_lowest;
    out.unreachable = true;
    return out;
  }
  if (std::abs(at_lowest - n0) <= tol) {
    out.exponent = kLowest;
    out.n_eff = at_lowest;
    return out;
  }

  // n_eff(lo) > n0 > n_eff(hi). Bisect to the resolution of a double rather
  // than stopping at the first point inside the tolerance, so the answer
  // does not sit at the edge of the acceptance band.
  double lo = kLowest;
  double hi = 1.0;
  double best_mid = hi;
  double best_v = out.n_eff;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = neff(mid);
    if (std::abs(v - n0) < std::abs(best_v - n0)) {
      best_mid = mid;
      best_v = v;
    }
    if (v == n0) break;
    (v > n0 ? lo : hi) = mid;
  }
  if (std::abs(best_v - n0) <= tol) {
    out.exponent = best_mid;
    out.n_eff = best_v;
    return out;
  }
  double best = 1.0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 1000; ++k) {
    const double lambda = 1e-3 * k;
    const double gap = std::abs(neff(lambda) - n0);
    if (gap < best_gap) {
      best_gap = gap;
      best = lambda;
    }
  }
  out.exponent = best;
  out.n_eff = neff(best);
  return out;
}

ImportanceWeights ImportanceWeights::unsmoothed(std::vector<double> raw) {
  return with_exponent(std::move(raw), 1.0);
}

ImportanceWeights ImportanceWeights::with_exponent(std::vector<double> raw, double exponent) {
  if (!(exponent > 0.0 && exponent <= 1.0)) throw ConfigError("smoothing exponent must lie in (0, 1]");
  ImportanceWeights w;
  w.raw = std::move(raw);
  w.smoothing_exponent = exponent;
  w.effective.reserve(w.raw.size());
  for (double v : w.raw) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("raw weights must be finite and >= 0");
    w.effective.push_back(exponent == 1.0 ? v : (v > 0.0 ? std::pow(v, exponent) : 0.0));
  }
  w.n_eff = effective_sample_size(w.effective);
  return w;
}

ImportanceWeights ImportanceWeights::regularized(std::vector<double> raw, double n0_fraction) {
  if (!(n0_fraction > 0.0 && n0_fraction < 1.0)) throw ConfigError("n0 fraction must lie in (0, 1)");
  const double n0 = n0_fraction * static_cast<double>(raw.size());
  if (!(n0 > 1.0)) return unsmoothed(std::move(raw));
  const auto solution = solve_smoothing_exponent(raw, n0);
  auto w = with_exponent(std::move(raw), solution.exponent);
  w.target_unreachable = solution.unreachable;
  return w;
}

void ClassifierRatioConfig::validate() const {
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  if (n_trees < 1 || nodesize < 1) throw ConfigError("invalid classifier forest controls");
}

double ClassifierRatio::odds_to_ratio(double probability) const {
  return prior_factor * (probability + delta) / (1.0 - probability + delta);
}

std::vector<double> ClassifierRatio::predict(const Matrix& x) const {
  auto out = predict_mean(forest, x);
  for (auto& v : out) v = odds_to_ratio(v);
  return out;
}

ClassifierRatio classifier_ratio_fit(const Matrix& train_x, const Matrix& test_x,
                                     const ClassifierRatioConfig& config, std::uint64_t seed) {
  config.validate();
  if (train_x.rows() == 0 || test_x.rows() == 0)
    throw ConfigError("classifier ratio needs both classes to be nonempty");
  if (train_x.cols() != test_x.cols()) throw DimensionError("train and test column counts differ");

  Matrix stacked(train_x.rows() + test_x.rows(), train_x.cols());
  std::vector<double> label(stacked.rows(), 0.0);
  for (std::size_t i = 0; i < train_x.rows(); ++i)
    std::copy(train_x.row(i).begin(), train_x.row(i).end(), stacked.row(i).begin());
  for (std::size_t i = 0; i < test_x.rows(); ++i) {
    const auto r = train_x.rows() + i;
    std::copy(test_x.row(i).begin(), test_x.row(i).end(), stacked.row(r).begin());
    label[r] = 1.0;
  }

  ForestControls controls;
  controls.n_trees = config.n_trees;
  controls.mtry = config.mtry;
  controls.nodesize = config.nodesize;
  controls.sample_fraction = config.sample_fraction;
  controls.with_replacement = config.with_replacement;
  controls.threads = config.threads;
  controls.seed = derive_seed(seed, Stream::kClassifier);

  ClassifierRatio out;
  out.delta = config.delta;
  out.prior_factor = static_cast<double>(train_x.rows()) / static_cast<double>(test_x.rows());
  out.forest = fit_forest(stacked, label, {}, controls);

  const auto oob = oob_predictions(out.forest, stacked);
  out.train_weights.resize(train_x.rows());
  for (std::size_t i = 0; i < train_x.rows(); ++i) {
    const double prob =
        oob.tree_count[i] > 0 ? oob.prediction[i] : predict_mean(out.forest, train_x.row(i));
    out.train_weights[i] = out.odds_to_ratio(prob);
  }
  return out;
}

}  // namespace lorf
