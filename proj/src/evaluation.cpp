#include "bwlab/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "bwlab/errors.hpp"
#include "bwlab/rng.hpp"

namespace bwlab {

namespace {

void validate_cv(const CVConfig& cv) {
  if (cv.folds < 2) throw UsageError("CVConfig: folds must be at least 2");
  if (cv.holdout_fraction < 0 || cv.holdout_fraction >= 0.5)
    throw UsageError("CVConfig: holdout_fraction must lie in [0, 0.5)");
}

std::vector<std::string> generic_names(Eigen::Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

std::string describe_point(ModelFamily family, const HyperParams& params) {
  std::string out = to_string(family);
  out += "{";
  bool first = true;
  for (const auto& [key, value] : params) {
    if (!first) out += ", ";
    first = false;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", value);
    out += key + "=" + buf;
  }
  out += "}";
  return out;
}

MatrixXd take_rows(const MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

VectorXd take(const VectorXd& v, const std::vector<Eigen::Index>& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

// Fold-mean metrics. rmse is rederived from the mean mse so the rmse² = mse
// identity survives averaging; the grid selection key stays mean fold rmse.
Metrics fold_mean(const std::vector<Metrics>& folds) {
  Metrics m;
  for (const Metrics& f : folds) {
    m.mse += f.mse;
    m.r2 += f.r2;
  }
  m.mse /= static_cast<double>(folds.size());
  m.r2 /= static_cast<double>(folds.size());
  m.rmse = std::sqrt(m.mse);
  return m;
}

struct FoldData {
  MatrixXd x_train;
  VectorXd y_train;
  MatrixXd x_val;
  VectorXd y_val;
};

struct GridChoice {
  std::size_t index = 0;
  HyperParams best;
  Metrics cv_metrics;
  std::vector<std::string> failures;
};

// Shared grid loop: fixed-X grid_search and the per-fold-pipeline path both
// reduce to scoring grid points over prepared folds.
GridChoice best_over_grid(ModelFamily family, const std::vector<HyperParams>& grid,
                          const std::vector<FoldData>& folds,
                          const std::vector<std::string>& names,
                          std::uint64_t model_seed) {
  if (grid.empty()) throw UsageError("grid_search: grid must be nonempty");

  GridChoice choice;
  bool have_best = false;
  double best_key = 0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    std::vector<Metrics> fold_metrics;
    fold_metrics.reserve(folds.size());
    try {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        ModelSpec spec{family, grid[gi], Rng::derive(model_seed, f)};
        TrainedModel model = fit(spec, folds[f].x_train, folds[f].y_train, names);
        fold_metrics.push_back(
            compute_metrics(folds[f].y_val, model.predict(folds[f].x_val)));
      }
    } catch (const std::exception& e) {
      choice.failures.push_back(describe_point(family, grid[gi]) + ": " + e.what());
      continue;
    }
    double key = 0;
    for (const Metrics& m : fold_metrics) key += m.rmse;
    key /= static_cast<double>(fold_metrics.size());
    if (!have_best || key < best_key) {
      have_best = true;
      best_key = key;
      choice.index = gi;
      choice.best = grid[gi];
      choice.cv_metrics = fold_mean(fold_metrics);
    }
  }
  if (!have_best)
    throw NumericError("grid_search: every grid point failed; first: " +
                       choice.failures.front());
  return choice;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Shuffled split into (train, holdout) with |holdout| = round(n * fraction).
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> holdout_split(
    Eigen::Index n, double fraction, std::uint64_t seed) {
  const auto h = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  Rng rng(seed);
  const std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> holdout, train;
  holdout.reserve(h);
  train.reserve(static_cast<std::size_t>(n) - h);
  for (std::size_t i = 0; i < perm.size(); ++i)
    (i < h ? holdout : train).push_back(static_cast<Eigen::Index>(perm[i]));
  std::sort(holdout.begin(), holdout.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(holdout)};
}

}  // namespace

std::vector<Fold> kfold_split(Eigen::Index n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("kfold_split needs at least 2 folds");
  if (n < static_cast<Eigen::Index>(folds))
    throw UsageError("kfold_split: fewer rows than folds");

  Rng rng(seed);
  const std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(n));

  const std::size_t base = static_cast<std::size_t>(n) / folds;
  const std::size_t extra = static_cast<std::size_t>(n) % folds;

  std::vector<Fold> out(folds);
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i)
      out[f].validation.push_back(static_cast<Eigen::Index>(perm[cursor + i]));
    cursor += size;
  }
  for (std::size_t f = 0; f < folds; ++f) {
    std::sort(out[f].validation.begin(), out[f].validation.end());
    for (std::size_t g = 0; g < folds; ++g) {
      if (g == f) continue;
      out[f].train.insert(out[f].train.end(), out[g].validation.begin(),
                          out[g].validation.end());
    }
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

Metrics compute_metrics(const VectorXd& y_true, const VectorXd& y_pred) {
  if (y_true.size() != y_pred.size())
    throw UsageError("compute_metrics: length mismatch");
  if (y_true.size() < 2) throw UsageError("compute_metrics: needs at least 2 values");

  Metrics m;
  const VectorXd err = y_true - y_pred;
  m.mse = err.squaredNorm() / static_cast<double>(y_true.size());
  m.rmse = std::sqrt(m.mse);

  const double mean = y_true.mean();
  const double ss_tot = (y_true.array() - mean).matrix().squaredNorm();
  if (ss_tot == 0.0)
    throw DataError("r2 is undefined for a constant target");
  m.r2 = 1.0 - err.squaredNorm() / ss_tot;
  return m;
}

GridSearchResult grid_search(ModelFamily family, const std::vector<HyperParams>& grid,
                             const MatrixXd& x, const VectorXd& y, const CVConfig& cv,
                             std::uint64_t model_seed) {
  validate_cv(cv);
  if (x.rows() != y.size()) throw UsageError("grid_search: row count mismatch");

  const std::vector<Fold> folds = kfold_split(x.rows(), cv.folds, Rng::derive(cv.seed, "cv"));
  std::vector<FoldData> data(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    data[f].x_train = take_rows(x, folds[f].train);
    data[f].y_train = take(y, folds[f].train);
    data[f].x_val = take_rows(x, folds[f].validation);
    data[f].y_val = take(y, folds[f].validation);
  }

  const GridChoice choice = best_over_grid(family, grid, data, generic_names(x.cols()),
                                           model_seed);
  GridSearchResult out;
  out.best = choice.best;
  out.cv_metrics = choice.cv_metrics;
  out.failures = choice.failures;
  return out;
}

std::vector<ModelEntry> default_model_list() {
  std::vector<ModelEntry> list;
  for (ModelFamily family : all_model_families())
    list.push_back({to_string(family), family, {}});
  // Four restricted variants round the list out to twelve entries, one per
  // selector, so the full product covers 144 combinations.
  list.push_back({"ridge_strong",
                  ModelFamily::ridge,
                  {{{"lambda", 10.0}}, {{"lambda", 100.0}}}});
  list.push_back({"lasso_sparse",
                  ModelFamily::lasso,
                  {{{"lambda_ratio", 0.05}}, {{"lambda_ratio", 0.2}}}});
  list.push_back({"cart_deep",
                  ModelFamily::cart,
                  {{{"max_depth", 12.0}, {"min_leaf", 2.0}},
                   {{"max_depth", 16.0}, {"min_leaf", 2.0}}}});
  list.push_back({"gradient_boosting_slow",
                  ModelFamily::gradient_boosting,
                  {{{"learning_rate", 0.05}, {"stages", 200.0}, {"max_depth", 2.0}},
                   {{"learning_rate", 0.05}, {"stages", 300.0}, {"max_depth", 2.0}}}});
  return list;
}

const char* to_string(PipelineMode mode) {
  return mode == PipelineMode::paper ? "paper" : "leak-free";
}

EvalRecord evaluate_combo(const SelectorReport& report, const ModelEntry& model,
                          const DataMatrix& completed, const std::string& target,
                          const ComboConfig& config) {
  validate_cv(config.cv);
  if (!completed.all_observed())
    throw DataError("evaluate_combo requires complete data; impute first");
  if (report.ranked.empty()) throw UsageError("evaluate_combo: empty selector report");

  const Eigen::Index target_col = completed.index_of(target);
  const MatrixXd& all = completed.matrix();
  const VectorXd y = all.col(target_col);

  std::vector<std::string> names;
  std::vector<Eigen::Index> cols;
  names.reserve(report.ranked.size() + config.extra_columns.size());
  for (const RankedFeature& f : report.ranked) {
    const Eigen::Index j = completed.index_of(f.name);
    if (j == target_col)
      throw UsageError("evaluate_combo: selector report includes the target");
    cols.push_back(j);
    names.push_back(f.name);
  }
  for (const std::string& extra : config.extra_columns) {
    const Eigen::Index j = completed.index_of(extra);
    if (j == target_col)
      throw UsageError("evaluate_combo: extra_columns include the target");
    if (std::find(cols.begin(), cols.end(), j) != cols.end()) continue;
    cols.push_back(j);
    names.push_back(extra);
  }
  MatrixXd x(all.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k)
    x.col(static_cast<Eigen::Index>(k)) = all.col(cols[k]);

  const auto [train_rows, holdout_rows] =
      holdout_split(all.rows(), config.cv.holdout_fraction,
                    Rng::derive(config.seed, "holdout"));
  if (holdout_rows.size() < 2)
    throw UsageError("evaluate_combo: holdout_fraction leaves fewer than 2 rows");

  const MatrixXd x_train = take_rows(x, train_rows);
  const VectorXd y_train = take(y, train_rows);

  const std::vector<HyperParams> grid =
      model.grid.empty() ? default_grid(model.family, x.cols()) : model.grid;
  CVConfig cv = config.cv;
  cv.seed = Rng::derive(config.seed, "cv");
  const GridSearchResult search =
      grid_search(model.family, grid, x_train, y_train, cv,
                  Rng::derive(config.seed, "model"));

  ModelSpec final_spec{model.family, search.best, Rng::derive(config.seed, "final")};
  TrainedModel final_model = fit(final_spec, x_train, y_train, names);

  EvalRecord record;
  record.selector_name = report.selector_name;
  record.model_name = model.name;
  record.family = model.family;
  record.chosen_params = search.best;
  record.cv_metrics = search.cv_metrics;
  record.holdout_metrics =
      compute_metrics(take(y, holdout_rows), final_model.predict(take_rows(x, holdout_rows)));
  record.final_model = std::move(final_model);
  record.note = join(search.failures, "; ");
  return record;
}

FoldPipeline fit_fold_pipeline(const DataMatrix& features, const VectorXd& y,
                               const std::vector<Eigen::Index>& train_rows,
                               const std::string& selector_name,
                               const ComboConfig& config, std::uint64_t seed) {
  if (train_rows.empty()) throw UsageError("fit_fold_pipeline: empty training set");
  if (y.size() != features.rows())
    throw UsageError("fit_fold_pipeline: target length mismatch");

  const DataMatrix train = features.subset_rows(train_rows);

  ImputationConfig imp = config.imputation;
  imp.seed = Rng::derive(seed, "impute");
  ImputationModel imputer = fit_imputer(train, imp);

  SelectorConfig sel = config.selector;
  sel.seed = Rng::derive(seed, "selector");
  SelectorReport report = run_selector(selector_name, imputer.train.completed.matrix(),
                                       take(y, train_rows), features.column_names(), sel);

  std::vector<Eigen::Index> feature_columns;
  feature_columns.reserve(report.ranked.size() + config.extra_columns.size());
  for (const RankedFeature& f : report.ranked)
    feature_columns.push_back(features.index_of(f.name));
  for (const std::string& extra : config.extra_columns) {
    const Eigen::Index j = features.index_of(extra);
    if (std::find(feature_columns.begin(), feature_columns.end(), j) == feature_columns.end())
      feature_columns.push_back(j);
  }
  return FoldPipeline{std::move(imputer), std::move(report), std::move(feature_columns)};
}

namespace {

// One leak-free combo: the imputer and selector are refit inside every
// training split, and holdout/validation rows only ever pass through the
// frozen transform of a model trained without them.
EvalRecord leak_free_combo(const DataMatrix& features, const VectorXd& y,
                           const std::string& selector_name, const ModelEntry& model,
                           const ComboConfig& config, std::uint64_t combo_seed) {
  const auto [train_rows, holdout_rows] =
      holdout_split(features.rows(), config.cv.holdout_fraction,
                    Rng::derive(combo_seed, "holdout"));
  if (holdout_rows.size() < 2)
    throw UsageError("run_grid: holdout_fraction leaves fewer than 2 rows");

  const std::vector<Fold> folds =
      kfold_split(static_cast<Eigen::Index>(train_rows.size()), config.cv.folds,
                  Rng::derive(Rng::derive(combo_seed, "cv"), "cv"));

  std::vector<FoldData> data(folds.size());
  std::vector<std::string> names;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<Eigen::Index> tr, val;
    for (Eigen::Index i : folds[f].train) tr.push_back(train_rows[i]);
    for (Eigen::Index i : folds[f].validation) val.push_back(train_rows[i]);

    const FoldPipeline pipe = fit_fold_pipeline(features, y, tr, selector_name, config,
                                                Rng::derive(combo_seed, f));
    data[f].x_train =
        pipe.imputer.train.completed.subset_cols(pipe.feature_columns).matrix();
    data[f].y_train = take(y, tr);
    const DataMatrix val_completed = impute_with(pipe.imputer, features.subset_rows(val));
    data[f].x_val = val_completed.subset_cols(pipe.feature_columns).matrix();
    data[f].y_val = take(y, val);
    if (f == 0)
      for (Eigen::Index j : pipe.feature_columns) names.push_back(features.name(j));
  }

  const std::vector<HyperParams> grid =
      model.grid.empty() ? default_grid(model.family, data[0].x_train.cols())
                         : model.grid;
  const GridChoice choice = best_over_grid(model.family, grid, data, names,
                                           Rng::derive(combo_seed, "model"));

  const FoldPipeline final_pipe = fit_fold_pipeline(
      features, y, train_rows, selector_name, config, Rng::derive(combo_seed, "final_fit"));
  std::vector<std::string> final_names;
  for (Eigen::Index j : final_pipe.feature_columns) final_names.push_back(features.name(j));

  ModelSpec final_spec{model.family, choice.best, Rng::derive(combo_seed, "final")};
  TrainedModel final_model =
      fit(final_spec,
          final_pipe.imputer.train.completed.subset_cols(final_pipe.feature_columns).matrix(),
          take(y, train_rows), final_names);

  const DataMatrix holdout_completed =
      impute_with(final_pipe.imputer, features.subset_rows(holdout_rows));

  EvalRecord record;
  record.selector_name = selector_name;
  record.model_name = model.name;
  record.family = model.family;
  record.chosen_params = choice.best;
  record.cv_metrics = choice.cv_metrics;
  record.holdout_metrics = compute_metrics(
      take(y, holdout_rows),
      final_model.predict(holdout_completed.subset_cols(final_pipe.feature_columns).matrix()));
  record.final_model = std::move(final_model);
  record.note = join(choice.failures, "; ");
  return record;
}

}  // namespace

GridRunResult run_grid(const std::vector<std::string>& selector_names,
                       const std::vector<ModelEntry>& models, const DataMatrix& data,
                       const std::string& target, const ComboConfig& config,
                       std::size_t workers) {
  if (selector_names.empty() || models.empty())
    throw UsageError("run_grid: selector and model lists must be nonempty");
  if (workers < 1) throw UsageError("run_grid: workers must be at least 1");
  validate_cv(config.cv);

  const Eigen::Index target_col = data.index_of(target);
  if (data.observed_count(target_col) != static_cast<std::size_t>(data.rows()))
    throw DataError("run_grid: target column has missing values");
  VectorXd y(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) y[i] = data.at(i, target_col);

  for (const std::string& extra : config.extra_columns) {
    if (extra == target) throw UsageError("run_grid: extra_columns include the target");
    data.index_of(extra);
  }

  const DataMatrix features = data.drop_column(target_col);

  // Paper mode imputes once and runs every selector once on the full data,
  // exactly as the combos will see it.
  std::vector<SelectorReport> reports(selector_names.size());
  std::vector<std::string> report_errors(selector_names.size());
  std::optional<DataMatrix> combined;  // completed features plus target
  if (config.mode == PipelineMode::paper) {
    ImputationConfig imp = config.imputation;
    imp.seed = Rng::derive(config.seed, "impute");
    const DataMatrix completed = hybrid_impute(features, imp).completed;
    const MatrixXd& x_all = completed.matrix();
    for (std::size_t s = 0; s < selector_names.size(); ++s) {
      SelectorConfig sel = config.selector;
      sel.seed = Rng::derive(config.seed, "selector:" + selector_names[s]);
      try {
        reports[s] = run_selector(selector_names[s], x_all, y, completed.column_names(), sel);
      } catch (const std::exception& e) {
        report_errors[s] = e.what();
      }
    }
    MatrixXd values(completed.rows(), completed.cols() + 1);
    values.leftCols(completed.cols()) = x_all;
    values.col(completed.cols()) = y;
    std::vector<std::string> names = completed.column_names();
    names.push_back(target);
    combined.emplace(DataMatrix::complete(std::move(values), std::move(names)));
  }

  const std::size_t combos = selector_names.size() * models.size();
  std::vector<EvalRecord> records(combos);

  const auto eval_one = [&](std::size_t idx) {
    const std::size_t s = idx / models.size();
    const std::size_t m = idx % models.size();
    ComboConfig combo = config;
    combo.seed = Rng::derive(Rng::derive(config.seed, selector_names[s]), models[m].name);
    EvalRecord& record = records[idx];
    record.selector_name = selector_names[s];
    record.model_name = models[m].name;
    record.family = models[m].family;
    try {
      if (config.mode == PipelineMode::paper) {
        if (!report_errors[s].empty())
          throw DataError("selector failed: " + report_errors[s]);
        record = evaluate_combo(reports[s], models[m], *combined, target, combo);
      } else {
        record = leak_free_combo(features, y, selector_names[s], models[m], config,
                                 combo.seed);
      }
    } catch (const std::exception& e) {
      record.failed = true;
      record.note = e.what();
    }
  };

  if (workers == 1) {
    for (std::size_t idx = 0; idx < combos; ++idx) eval_one(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min(workers, combos);
    pool.reserve(spawn);
    for (std::size_t w = 0; w < spawn; ++w) {
      pool.emplace_back([&] {
        for (std::size_t idx = next.fetch_add(1); idx < combos; idx = next.fetch_add(1))
          eval_one(idx);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  GridRunResult out;
  out.records = std::move(records);
  out.leaderboard = rank_records(out.records);
  out.selector_frequency = selector_frequency(out.records, out.leaderboard, selector_names);
  return out;
}

std::vector<std::size_t> rank_records(const std::vector<EvalRecord>& records) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!records[i].failed) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Metrics& ma = records[a].holdout_metrics;
    const Metrics& mb = records[b].holdout_metrics;
    if (ma.rmse != mb.rmse) return ma.rmse < mb.rmse;
    if (ma.r2 != mb.r2) return ma.r2 > mb.r2;
    return a < b;
  });
  return order;
}

std::vector<std::pair<std::string, std::size_t>> selector_frequency(
    const std::vector<EvalRecord>& records, const std::vector<std::size_t>& leaderboard,
    const std::vector<std::string>& order) {
  std::vector<std::pair<std::string, std::size_t>> out;
  const std::size_t top = std::min<std::size_t>(20, leaderboard.size());
  for (const std::string& name : order) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < top; ++i)
      if (records[leaderboard[i]].selector_name == name) ++count;
    out.emplace_back(name, count);
  }
  return out;
}

ResidualBins residual_analysis(const TrainedModel& model, const DataMatrix& x_eval,
                               const VectorXd& y_eval) {
  if (y_eval.size() != x_eval.rows())
    throw UsageError("residual_analysis: target length mismatch");

  ResidualBins bins;
  bins.edges = {0.0, 50.0, 100.0, 500.0, 1000.0};
  bins.counts.assign(bins.edges.size(), 0);

  const VectorXd pred = model.predict(x_eval);
  double abs_sum = 0;
  for (Eigen::Index i = 0; i < y_eval.size(); ++i) {
    const double r = std::abs(y_eval[i] - pred[i]);
    abs_sum += r;
    const auto it = std::upper_bound(bins.edges.begin(), bins.edges.end(), r);
    bins.counts[static_cast<std::size_t>(it - bins.edges.begin()) - 1]++;
  }
  bins.mean_abs_error = abs_sum / static_cast<double>(y_eval.size());
  bins.percentages.reserve(bins.counts.size());
  for (std::size_t c : bins.counts)
    bins.percentages.push_back(100.0 * static_cast<double>(c) /
                               static_cast<double>(y_eval.size()));
  return bins;
}

std::vector<ImportanceEntry> feature_importance_report(const TrainedModel& model) {
  const VectorXd totals = tree_gain_totals(model);
  const double sum = totals.sum();
  std::vector<ImportanceEntry> out;
  out.reserve(model.feature_names.size());
  for (std::size_t j = 0; j < model.feature_names.size(); ++j) {
    const double gain = totals[static_cast<Eigen::Index>(j)];
    out.push_back({model.feature_names[j], sum > 0 ? gain / sum : 0.0});
  }
  return out;
}

SexGapReport sex_gap(const DataMatrix& data, const std::string& target,
                     const std::string& sex_column) {
  const Eigen::Index t = data.index_of(target);
  const Eigen::Index s = data.index_of(sex_column);

  std::set<double> levels;
  std::vector<std::pair<double, double>> pairs;  // (sex, target)
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (!data.observed(i, s) || !data.observed(i, t)) continue;
    pairs.emplace_back(data.at(i, s), data.at(i, t));
    levels.insert(pairs.back().first);
  }
  if (levels.size() != 2)
    throw DataError("sex_gap: column '" + sex_column + "' is not binary");

  const double low = *levels.begin();
  std::vector<double> g0, g1;
  for (const auto& [sex, value] : pairs) (sex == low ? g0 : g1).push_back(value);
  if (g0.size() < 2 || g1.size() < 2)
    throw DataError("sex_gap: each group needs at least 2 rows");

  const auto mean_var = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) /
                        static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::make_pair(mean, ss / static_cast<double>(v.size() - 1));
  };
  const auto [m0, v0] = mean_var(g0);
  const auto [m1, v1] = mean_var(g1);
  const double n0 = static_cast<double>(g0.size());
  const double n1 = static_cast<double>(g1.size());

  SexGapReport report;
  report.gap = m1 - m0;
  report.n0 = g0.size();
  report.n1 = g1.size();

  const double a = v0 / n0;
  const double b = v1 / n1;
  const double se = std::sqrt(a + b);
  if (se == 0) {
    report.ci_low = report.ci_high = report.gap;
    return report;
  }
  const double df = (a + b) * (a + b) / (a * a / (n0 - 1) + b * b / (n1 - 1));
  const boost::math::students_t dist(df);
  const double t_crit = boost::math::quantile(dist, 0.975);
  report.ci_low = report.gap - t_crit * se;
  report.ci_high = report.gap + t_crit * se;
  return report;
}

}  // namespace bwlab
