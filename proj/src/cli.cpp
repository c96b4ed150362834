#include "lorf/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <deque>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "lorf/dataset.hpp"
#include "lorf/density_ratio.hpp"
#include "lorf/error.hpp"
#include "lorf/evaluation.hpp"
#include "lorf/forest.hpp"
#include "lorf/forest_io.hpp"
#include "lorf/imputation.hpp"

namespace lorf {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct ForestFlags {
  std::size_t trees = 500;
  std::size_t mtry = 0;
  std::size_t nodesize = 5;
  std::size_t max_nodes = 0;
  std::size_t min_split = 0;
  double complexity = 0.0;
  double sample_fraction = 0.6;
  bool replace = false;

  ForestControls controls(std::uint64_t seed, std::size_t threads) const {
    ForestControls c;
    c.n_trees = trees;
    c.mtry = mtry;
    c.nodesize = nodesize;
    c.max_terminal_nodes = max_nodes;
    c.min_split = min_split;
    c.complexity = complexity;
    c.sample_fraction = sample_fraction;
    c.with_replacement = replace;
    c.seed = seed;
    c.threads = threads;
    return c;
  }
};

void add_forest_flags(CLI::App* cmd, ForestFlags& f) {
  cmd->add_option("--trees", f.trees, "Number of trees")->capture_default_str();
  cmd->add_option("--mtry", f.mtry, "Features tried per split (0: ceil(p/3))")->capture_default_str();
  cmd->add_option("--nodesize", f.nodesize, "Minimum rows per terminal node")->capture_default_str();
  cmd->add_option("--max-nodes", f.max_nodes, "Maximum terminal nodes per tree (0: unlimited)")
      ->capture_default_str();
  cmd->add_option("--min-split", f.min_split, "Minimum rows to split a node (0: 2 x nodesize)")
      ->capture_default_str();
  cmd->add_option("--complexity", f.complexity, "Minimum SSE reduction per split, relative to the root")
      ->capture_default_str();
  cmd->add_option("--sample-fraction", f.sample_fraction, "Rows drawn per tree, as a fraction of n")
      ->capture_default_str();
  cmd->add_flag("--replace", f.replace, "Resample with replacement");
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  int verbosity = 0;
};

Common& add_common_flags(CLI::App* cmd, std::deque<Common>& store) {
  Common& c = store.emplace_back();
  cmd->add_option("--seed", c.seed, "Master random seed")->envname("LORF_SEED")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads (0: all cores)")
      ->envname("LORF_THREADS")
      ->capture_default_str();
  cmd->add_flag("-v,--verbose", c.verbosity, "Print progress to stderr");
  return c;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& field : split_csv_line(text)) {
    if (field.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used != field.size()) throw ConfigError("invalid number '" + field + "' in list");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

/// A CLI string rendered as the most specific JSON scalar it spells.
/// Typed JSON for an option value; text-typed options (paths, lists) stay strings.
json typed_value(const CLI::Option* opt, const std::string& text) {
  if (text.empty()) return nullptr;
  if (opt->get_type_name() == "TEXT") return text;
  if (text == "true" || text == "false") return text == "true";
  if (text.find_first_not_of("0123456789") == std::string::npos && text.size() < 19)
    return std::stoull(text);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() + text.size() && std::isfinite(v)) return v;
  return text;
}

/// Every option of a subcommand, with defaults filled in.
json resolved_options(const CLI::App* cmd) {
  json cfg = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->get_type_size() == 0) {
      cfg[name] = opt->count();
    } else if (opt->count() > 0) {
      cfg[name] = typed_value(opt, opt->results().front());
    } else {
      cfg[name] = typed_value(opt, opt->get_default_str());
    }
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<std::string> csv_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  return split_csv_line(line);
}

bool has_column(const fs::path& path, const std::string& name) {
  const auto h = csv_header(path);
  return std::find(h.begin(), h.end(), name) != h.end();
}

/// Loads covariates only: the named response column is dropped when present.
Dataset load_covariates(const fs::path& path, const std::string& response) {
  if (!response.empty() && has_column(path, response)) return load_dataset(path, response);
  return load_dataset(path);
}

void require_complete(const Dataset& d, const std::string& what) {
  if (d.has_missing()) throw ConfigError(what + " has missing cells; run `lorf impute` first");
}

/// Reads a weights file: the `regularized_weight` column when present,
/// otherwise the last column.
std::vector<double> load_weights(const fs::path& path, std::size_t expected) {
  const auto data = load_dataset(path);
  std::size_t col = data.p() - 1;
  for (std::size_t j = 0; j < data.p(); ++j)
    if (data.feature_names[j] == "regularized_weight") col = j;
  if (data.n() != expected)
    throw ConfigError("weights file has " + std::to_string(data.n()) + " rows, expected " +
                      std::to_string(expected));
  auto w = data.features.column(col);
  for (double v : w)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("weights must be finite and >= 0");
  return w;
}

/// Columns of `data` reordered to match the model's feature names.
Matrix align_features(const Dataset& data, const WeightedForest& forest) {
  std::vector<std::size_t> cols;
  for (const auto& name : forest.feature_names) {
    auto it = std::find(data.feature_names.begin(), data.feature_names.end(), name);
    if (it == data.feature_names.end()) throw ConfigError("data lacks model feature '" + name + "'");
    cols.push_back(static_cast<std::size_t>(it - data.feature_names.begin()));
  }
  return data.features.select_cols(cols);
}

std::string format_weights_csv(const ImportanceWeights& w) {
  std::ostringstream out;
  out << "row,raw_weight,regularized_weight\n";
  for (std::size_t i = 0; i < w.raw.size(); ++i)
    out << i << ',' << format_double(w.raw[i]) << ',' << format_double(w.effective[i]) << '\n';
  return out.str();
}

std::string level_label(double p) { return "q" + format_double(p); }

json metrics_json(const MetricsReport& m) {
  return {{"rmse", m.rmse},         {"mae", m.mae},
          {"covg", m.coverage},     {"int_width", m.interval_width},
          {"score", m.score},       {"alpha_level", m.alpha_level},
          {"score_infinite", m.score_infinite}, {"count", m.count}};
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(std::vector<std::string> args) {
    CLI::App app{"Importance-weighted random forests under covariate shift", "lorf"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    setup_simulate(app);
    setup_density_ratio(app);
    setup_fit(app);
    setup_predict(app);
    setup_tune(app);
    setup_impute(app);
    setup_eval(app);

    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return 0;
    } catch (const CLI::CallForVersion&) {
      out_ << kVersion << '\n';
      return 0;
    } catch (const CLI::ParseError& e) {
      err_ << "lorf: usage error: " << e.what() << '\n';
      return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
      CLI::App* cmd = app.get_subcommands().front();
      json outputs = json::array();
      action_(outputs);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!manifest_path_.empty()) write_manifest(cmd, outputs, wall);
      return 0;
    } catch (const Error& e) {
      err_ << "lorf: error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      err_ << "lorf: error: " << e.what() << '\n';
      return 1;
    }
  }

 private:
  void write_manifest(const CLI::App* cmd, const json& outputs, double wall) {
    json manifest = {{"tool", "lorf"},
                     {"version", kVersion},
                     {"subcommand", cmd->get_name()},
                     {"config", resolved_options(cmd)},
                     {"seed", common_->seed},
                     {"threads", common_->threads},
                     {"outputs", outputs},
                     {"versions",
                      {{"lorf", kVersion},
                       {"model_format", kModelFormatVersion},
                       {"compiler", __VERSION__},
                       {"cxx_standard", __cplusplus}}},
                     {"wall_time_seconds", wall}};
    write_text(manifest_path_, manifest.dump(2) + "\n");
  }

  void set_output(const std::string& path) { manifest_path_ = path + ".manifest.json"; }

  void log(const std::string& msg) const {
    if (common_->verbosity > 0) err_ << "lorf: " << msg << '\n';
  }

  // ---------------------------------------------------------------------
  void setup_simulate(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate", "Run the Dirichlet covariate-shift benchmark");
    static struct {
      std::string models = "1,2,3,4,5";
      std::string lambdas = "1,1.071,1.143,1.214,1.286,1.357,1.429,1.5";
      std::size_t reps = 30;
      std::size_t n_train = 1000;
      std::size_t n_test = 200;
      double n0_fraction = 0.75;
      std::string out;
      std::string json_out;
      SimulationConfig defaults;
      std::size_t trees = 500;
      std::size_t weighted_mtry = 0;
      std::size_t weighted_nodesize = 0;
      std::size_t weighted_min_split = 0;
      double weighted_complexity = 0.0;
      std::size_t unweighted_mtry = 0;
      std::size_t unweighted_nodesize = 0;
    } o;
    o = {};
    o.weighted_mtry = o.defaults.weighted_controls.mtry;
    o.weighted_nodesize = o.defaults.weighted_controls.nodesize;
    o.weighted_min_split = o.defaults.weighted_controls.min_split;
    o.weighted_complexity = o.defaults.weighted_controls.complexity;
    o.unweighted_mtry = o.defaults.unweighted_controls.mtry;
    o.unweighted_nodesize = o.defaults.unweighted_controls.nodesize;
    cmd->add_option("--models", o.models, "Comma-separated model ids (1..5)")->capture_default_str();
    cmd->add_option("--lambdas", o.lambdas, "Comma-separated shift strengths")->capture_default_str();
    cmd->add_option("--reps", o.reps, "Replications per cell")->capture_default_str();
    cmd->add_option("--n-train", o.n_train, "Training rows")->capture_default_str();
    cmd->add_option("--n-test", o.n_test, "Test rows")->capture_default_str();
    cmd->add_option("--n0-fraction", o.n0_fraction, "Target effective sample size / n")
        ->capture_default_str();
    cmd->add_option("--trees", o.trees, "Trees per forest")->capture_default_str();
    cmd->add_option("--weighted-mtry", o.weighted_mtry, "mtry of the weighted forest")->capture_default_str();
    cmd->add_option("--weighted-nodesize", o.weighted_nodesize, "nodesize of the weighted forest")
        ->capture_default_str();
    cmd->add_option("--weighted-min-split", o.weighted_min_split, "min_split of the weighted forest")
        ->capture_default_str();
    cmd->add_option("--weighted-complexity", o.weighted_complexity, "complexity of the weighted forest")
        ->capture_default_str();
    cmd->add_option("--unweighted-mtry", o.unweighted_mtry, "mtry of the unweighted forest")
        ->capture_default_str();
    cmd->add_option("--unweighted-nodesize", o.unweighted_nodesize, "nodesize of the unweighted forest")
        ->capture_default_str();
    cmd->add_option("--out", o.out, "Results CSV")->required();
    cmd->add_option("--json", o.json_out, "Optional JSON summary");
    Common& common = add_common_flags(cmd, commons_);
    cmd->callback([this, cmd, &common] {
      common_ = &common;
      action_ = [this, cmd](json& outputs) {
        (void)cmd;
        SimulationConfig cfg;
        cfg.model_ids.clear();
        for (double m : parse_list(o.models)) cfg.model_ids.push_back(static_cast<int>(m));
        cfg.lambda_grid = parse_list(o.lambdas);
        cfg.replications = o.reps;
        cfg.n_train = o.n_train;
        cfg.n_test = o.n_test;
        cfg.n0_fraction = o.n0_fraction;
        cfg.weighted_controls.n_trees = o.trees;
        cfg.weighted_controls.mtry = o.weighted_mtry;
        cfg.weighted_controls.nodesize = o.weighted_nodesize;
        cfg.weighted_controls.min_split = o.weighted_min_split;
        cfg.weighted_controls.complexity = o.weighted_complexity;
        cfg.unweighted_controls.n_trees = o.trees;
        cfg.unweighted_controls.mtry = o.unweighted_mtry;
        cfg.unweighted_controls.nodesize = o.unweighted_nodesize;
        cfg.seed = common_->seed;
        cfg.threads = common_->threads;
        log("simulating " + std::to_string(cfg.model_ids.size() * cfg.lambda_grid.size()) + " cells");
        const auto results = run_simulation_study(cfg);
        write_results_csv(results, o.out);
        outputs.push_back(o.out);
        if (!o.json_out.empty()) {
          json summary = json::array();
          for (const auto& r : results)
            summary.push_back({{"model", r.model_id},
                               {"lambda", r.lambda_shift},
                               {"replications", r.replications},
                               {"failed", r.failed},
                               {"mean_n_eff", r.mean_n_eff},
                               {"mean_smoothing_exponent", r.mean_smoothing_exponent},
                               {"weighted", metrics_json(r.weighted)},
                               {"unweighted", metrics_json(r.unweighted)}});
          write_text(o.json_out, summary.dump(2) + "\n");
          outputs.push_back(o.json_out);
        }
      };
      set_output(o.out);
    });
  }

  void setup_density_ratio(CLI::App& app) {
    auto* cmd = app.add_subcommand("density-ratio", "Estimate importance weights for training rows");
    static struct {
      std::string train, test, method = "ulsif", out, response;
      double n0_fraction = 0.75;
      std::size_t max_centroids = 100;
      double delta = 1e-2;
      std::size_t trees = 500;
      std::size_t classifier_nodesize = 10;
    } o;
    o = {};
    cmd->add_option("--train", o.train, "Training CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--test", o.test, "Test CSV (covariates)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--method", o.method, "ulsif or classifier")
        ->check(CLI::IsMember({"ulsif", "classifier"}))
        ->capture_default_str();
    cmd->add_option("--response", o.response, "Column to drop from both files when present");
    cmd->add_option("--n0-fraction", o.n0_fraction, "Target effective sample size / n")
        ->capture_default_str();
    cmd->add_option("--max-centroids", o.max_centroids, "uLSIF kernel centroids")->capture_default_str();
    cmd->add_option("--delta", o.delta, "Classifier odds stabilizer")->capture_default_str();
    cmd->add_option("--trees", o.trees, "Classifier forest size")->capture_default_str();
    cmd->add_option("--classifier-nodesize", o.classifier_nodesize, "Classifier forest leaf size")
        ->capture_default_str();
    cmd->add_option("--out", o.out, "Weights CSV")->required();
    Common& common = add_common_flags(cmd, commons_);
    cmd->callback([this, &common] {
      common_ = &common;
      action_ = [this](json& outputs) {
        const auto train = load_covariates(o.train, o.response);
        const auto test = load_covariates(o.test, o.response);
        require_complete(train, "training data");
        require_complete(test, "test data");
        if (train.feature_names != test.feature_names)
          throw ConfigError("training and test files have different feature columns");
        std::vector<double> raw;
        if (o.method == "ulsif") {
          const auto sigmas = default_bandwidth_grid(train.features, test.features, common_->seed);
          const auto model = ulsif_fit(train.features, test.features, sigmas, default_ridge_grid(),
                                       o.max_centroids, common_->seed);
          log("uLSIF bandwidth " + format_double(model.bandwidth) + ", ridge " + format_double(model.ridge));
          raw = ulsif_predict(model, train.features);
        } else {
          ClassifierRatioConfig cfg;
          cfg.delta = o.delta;
          cfg.n_trees = o.trees;
          cfg.nodesize = o.classifier_nodesize;
          cfg.threads = common_->threads;
          raw = classifier_ratio_fit(train.features, test.features, cfg, common_->seed).train_weights;
        }
        const auto weights = ImportanceWeights::regularized(std::move(raw), o.n0_fraction);
        if (weights.target_unreachable) err_ << "lorf: warning: n_eff target unreachable; using boundary exponent\n";
        log("smoothing exponent " + format_double(weights.smoothing_exponent) + ", n_eff " +
            format_double(weights.n_eff));
        write_text(o.out, format_weights_csv(weights));
        outputs.push_back(o.out);
      };
      set_output(o.out);
    });
  }

  void setup_fit(CLI::App& app) {
    auto* cmd = app.add_subcommand("fit", "Fit an importance-weighted forest");
    static struct {
      std::string train, response = "y", weights, test, out;
      double n0_fraction = 0.75;
      ForestFlags forest;
    } o;
    o = {};
    cmd->add_option("--train", o.train, "Training CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--response", o.response, "Response column")->capture_default_str();
    auto* w = cmd->add_option("--weights", o.weights, "Weights CSV from density-ratio")
                  ->check(CLI::ExistingFile);
    cmd->add_option("--test", o.test, "Pipeline mode: estimate uLSIF weights against this CSV")
        ->check(CLI::ExistingFile)
        ->excludes(w);
    cmd->add_option("--n0-fraction", o.n0_fraction, "Pipeline mode: target n_eff / n")->capture_default_str();
    cmd->add_option("--out", o.out, "Model JSON")->required();
    add_forest_flags(cmd, o.forest);
    Common& common = add_common_flags(cmd, commons_);
    cmd->callback([this, &common] {
      common_ = &common;
      action_ = [this](json& outputs) {
        const auto train = load_dataset(o.train, o.response);
        require_complete(train, "training data");
        std::vector<double> weights;
        if (!o.weights.empty()) {
          weights = load_weights(o.weights, train.n());
        } else if (!o.test.empty()) {
          const auto test = load_covariates(o.test, o.response);
          require_complete(test, "test data");
          if (test.feature_names != train.feature_names)
            throw ConfigError("training and test files have different feature columns");
          const auto model = ulsif_fit(train.features, test.features, common_->seed);
          weights = ImportanceWeights::regularized(ulsif_predict(model, train.features), o.n0_fraction)
                        .effective;
        }
        auto forest = fit_forest(train.features, *train.response, weights,
                                 o.forest.controls(common_->seed, common_->threads));
        forest.feature_names = train.feature_names;
        save_forest(forest, o.out);
        outputs.push_back(o.out);
      };
      set_output(o.out);
    });
  }

  void setup_predict(CLI::App& app) {
    auto* cmd = app.add_subcommand("predict", "Predict means and conditional quantiles");
    static struct {
      std::string model, data, quantiles = "0.1,0.5,0.9", out;
    } o;
    o = {};
    cmd->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", o.data, "CSV with the model's feature columns")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--quantiles", o.quantiles, "Comma-separated levels in (0,1)")->capture_default_str();
    cmd->add_option("--out", o.out, "Predictions CSV (stdout when omitted)");
    Common& common = add_common_flags(cmd, commons_);
    cmd->callback([this, &common] {
      common_ = &common;
      action_ = [this](json& outputs) {
        const auto forest = load_forest(o.model);
        const auto levels = parse_list(o.quantiles);
        const auto data = load_dataset(o.data);
        const auto x = align_features(data, forest);
        for (double v : x.data())
          if (!std::isfinite(v)) throw ConfigError("prediction data has missing cells");
        std::ostringstream csv;
        csv << "mean";
        for (double p : levels) csv << ',' << level_label(p);
        csv << '\n';
        for (std::size_t i = 0; i < x.rows(); ++i) {
          csv << format_double(predict_mean(forest, x.row(i)));
          for (double q : conditional_quantiles(forest, x.row(i), levels)) csv << ',' << format_double(q);
          csv << '\n';
        }
        if (o.out.empty()) {
          out_ << csv.str();
        } else {
          write_text(o.out, csv.str());
          outputs.push_back(o.out);
        }
      };
      if (!o.out.empty()) set_output(o.out);
    });
  }

  void setup_tune(CLI::App& app) {
    auto* cmd = app.add_subcommand("tune", "Select mtry by weighted out-of-bag error");
    static struct {
      std::string train, response = "y", weights, grid, out;
      ForestFlags forest;
    } o;
    o = {};
    cmd->add_option("--train", o.train, "Training CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--response", o.response, "Response column")->capture_default_str();
    cmd->add_option("--weights", o.weights, "Weights CSV")->check(CLI::ExistingFile);
    cmd->add_option("--mtry-grid", o.grid, "Comma-separated mtry values")->required();
    cmd->add_option("--out", o.out, "OOB table CSV")->required();
    add_forest_flags(cmd, o.forest);
    Common& common = add_common_flags(cmd, commons_);
    cmd->callback([this, &common] {
      common_ = &common;
      action_ = [this](json& outputs) {
        const auto train = load_dataset(o.train, o.response);
        require_complete(train, "training data");
        std::vector<double> weights;
        if (!o.weights.empty()) weights = load_weights(o.weights, train.n());
        std::vector<std::size_t> grid;
        for (double v : parse_list(o.grid)) {
          if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("mtry values must be positive integers");
          grid.push_back(static_cast<std::size_t>(v));
        }
        const auto result = tune_by_oob(train.features, *train.response, weights, grid,
                                        o.forest.controls(common_->seed, common_->threads));
        std::ostringstream csv;
        csv << "mtry,weighted_oob,uniform_oob\n";
        for (const auto& row : result.table)
          csv << row.mtry << ',' << format_double(row.weighted_oob) << ','
              << format_double(row.uniform_oob) << '\n';
        write_text(o.out, csv.str());
        out_ << "best mtry: " << result.best.mtry << '\n';
        outputs.push_back(o.out);
      };
      set_output(o.out);
    });
  }

  void setup_impute(CLI::App& app) {
    auto* cmd = app.add_subcommand("impute", "Fill missing covariates by quantile-forest draws");
    static struct {
      std::string in, out, response;
      bool chained = false;
      ForestFlags forest;
    } o;
    o = {};
    o.forest.trees = 100;
    cmd->add_option("--in", o.in, "CSV with missing cells")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "Imputed CSV")->required();
    cmd->add_option("--response", o.response, "Response column passed through untouched");
    cmd->add_flag("--chained", o.chained, "Also use previously imputed columns as predictors");
    add_forest_flags(cmd, o.forest);
    Common& common = add_common_flags(cmd, commons_);
    cmd->callback([this, &common] {
      common_ = &common;
      action_ = [this](json& outputs) {
        const auto data = o.response.empty() ? load_dataset(o.in) : load_dataset(o.in, o.response);
        auto plan = ImputationPlan::defaults(common_->seed);
        plan.controls = o.forest.controls(common_->seed, common_->threads);
        plan.use_imputed_columns = o.chained;
        ImputationReport report;
        const auto imputed = impute(data, plan, &report);
        write_dataset(imputed, o.out);
        json cols = json::array();
        for (const auto& c : report.columns)
          cols.push_back({{"column", c.name}, {"missing", c.missing}, {"order", c.order}});
        json predictors = json::array();
        for (auto j : report.predictor_columns) predictors.push_back(data.feature_names[j]);
        const json sidecar = {{"rows", data.n()},
                              {"columns", cols},
                              {"predictors", predictors},
                              {"seed", common_->seed}};
        const std::string report_path = o.out + ".report.json";
        write_text(report_path, sidecar.dump(2) + "\n");
        outputs.push_back(o.out);
        outputs.push_back(report_path);
      };
      set_output(o.out);
    });
  }

  void setup_eval(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "Score predictions against observed responses");
    static struct {
      std::string pred, truth, response = "y", mean = "mean", lower = "q0.1", upper = "q0.9", out;
      double alpha = 0.1;
    } o;
    o = {};
    cmd->add_option("--pred", o.pred, "Predictions CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--truth", o.truth, "CSV holding the observed response")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--response", o.response, "Response column in --truth")->capture_default_str();
    cmd->add_option("--mean", o.mean, "Point prediction column")->capture_default_str();
    cmd->add_option("--lower", o.lower, "Interval lower column")->capture_default_str();
    cmd->add_option("--upper", o.upper, "Interval upper column")->capture_default_str();
    cmd->add_option("--alpha", o.alpha, "Lower quantile level of the interval")->capture_default_str();
    cmd->add_option("--out", o.out, "Metrics JSON (stdout when omitted)");
    Common& common = add_common_flags(cmd, commons_);
    cmd->callback([this, &common] {
      common_ = &common;
      action_ = [this](json& outputs) {
        const auto pred = load_dataset(o.pred);
        const auto truth = load_dataset(o.truth, o.response);
        if (pred.n() != truth.n()) throw ConfigError("prediction and truth row counts differ");
        auto column = [&](const std::string& name) {
          auto it = std::find(pred.feature_names.begin(), pred.feature_names.end(), name);
          if (it == pred.feature_names.end()) throw ConfigError("predictions lack column '" + name + "'");
          return pred.features.column(static_cast<std::size_t>(it - pred.feature_names.begin()));
        };
        const auto report =
            compute_metrics(*truth.response, column(o.mean), column(o.lower), column(o.upper), o.alpha);
        const std::string text = metrics_json(report).dump(2) + "\n";
        if (o.out.empty()) {
          out_ << text;
        } else {
          write_text(o.out, text);
          outputs.push_back(o.out);
        }
      };
      if (!o.out.empty()) set_output(o.out);
    });
  }

  std::ostream& out_;
  std::ostream& err_;
  std::deque<Common> commons_;
  Common* common_ = nullptr;
  std::function<void(json&)> action_;
  std::string manifest_path_;
};

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(std::move(args));
}

}  // namespace lorf
