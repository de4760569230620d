#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bwlab/data_matrix.hpp"
#include "bwlab/imputation.hpp"
#include "bwlab/models.hpp"
#include "bwlab/selectors.hpp"

namespace bwlab {

struct CVConfig {
  std::size_t folds = 5;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct Fold {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
};

// Shuffled partition into `folds` validation sets of size floor(n/folds) or
// ceil(n/folds); the first n mod folds sets take the extra row.
std::vector<Fold> kfold_split(Eigen::Index n, std::size_t folds, std::uint64_t seed);

struct Metrics {
  double mse = 0;
  double rmse = 0;
  double r2 = 0;
};

/// MSE, its exact square root, and 1 - SS_res/SS_tot. Constant y_true throws.
Metrics compute_metrics(const VectorXd& y_true, const VectorXd& y_pred);

struct GridSearchResult {
  HyperParams best;
  Metrics cv_metrics;               // fold-mean metrics of the winner
  std::vector<std::string> failures;  // grid points that failed to fit
};

// Minimizes mean CV RMSE over the grid; ties keep the earliest point. Failed
// points are recorded and skipped; all points failing is an error.
GridSearchResult grid_search(ModelFamily family, const std::vector<HyperParams>& grid,
                             const MatrixXd& x, const VectorXd& y, const CVConfig& cv,
                             std::uint64_t model_seed);

struct EvalRecord {
  std::string selector_name;
  std::string model_name;  // list-entry name (family plus variant suffix)
  ModelFamily family = ModelFamily::ols;
  HyperParams chosen_params;
  Metrics cv_metrics;      // fold means; rmse rederived from mean mse
  Metrics holdout_metrics;
  TrainedModel final_model;  // winner refit on the full training split
  std::string note;
  bool failed = false;  // excluded from the leaderboard when set
};

// A named model-list entry: one family with a grid (defaults when empty).
struct ModelEntry {
  std::string name;
  ModelFamily family = ModelFamily::ols;
  std::vector<HyperParams> grid;  // empty = default_grid(family, q)
};

/// The twelve-entry model list that pairs with the twelve selectors.
std::vector<ModelEntry> default_model_list();

enum class PipelineMode { paper, leak_free };

const char* to_string(PipelineMode mode);

struct ComboConfig {
  CVConfig cv;
  PipelineMode mode = PipelineMode::paper;
  ImputationConfig imputation;
  SelectorConfig selector;
  std::vector<std::string> extra_columns;  // forced into the design after selection
  std::uint64_t seed = 0;
};

// Restricts the completed data to the report's features, holds out a test
// fraction, grid-searches on the remainder, refits the winner, and reports
// CV plus holdout metrics.
EvalRecord evaluate_combo(const SelectorReport& report, const ModelEntry& model,
                          const DataMatrix& completed, const std::string& target,
                          const ComboConfig& config);

struct GridRunResult {
  std::vector<EvalRecord> records;     // selector-major Cartesian order
  std::vector<std::size_t> leaderboard;  // indices into records, best first
  std::vector<std::pair<std::string, std::size_t>> selector_frequency;  // top-20 rows
};

/// Non-failed record indices ordered by holdout RMSE, then r2, then position.
std::vector<std::size_t> rank_records(const std::vector<EvalRecord>& records);

// How often each selector appears among the top min(20, size) leaderboard
// rows; `order` fixes the row order and zero-count selectors stay listed.
std::vector<std::pair<std::string, std::size_t>> selector_frequency(
    const std::vector<EvalRecord>& records, const std::vector<std::size_t>& leaderboard,
    const std::vector<std::string>& order);

// Full selector-by-model Cartesian product on raw (possibly incomplete) data.
// paper mode imputes and selects once up front; leak_free mode refits the
// imputer and selectors inside every training split. Individual combo
// failures land in the record notes instead of aborting the run.
GridRunResult run_grid(const std::vector<std::string>& selector_names,
                       const std::vector<ModelEntry>& models, const DataMatrix& data,
                       const std::string& target, const ComboConfig& config,
                       std::size_t workers = 1);

struct FoldPipeline {
  ImputationModel imputer;              // fit on the training rows only
  SelectorReport report;                // selector run on the completed training rows
  std::vector<Eigen::Index> feature_columns;  // kept columns of the feature frame
};

// The training half of one leak-free fold: imputer and selector fit on
// train_rows of the raw feature frame without touching any other row, so a
// row-read log on `features` can prove the absence of validation leakage.
FoldPipeline fit_fold_pipeline(const DataMatrix& features, const VectorXd& y,
                               const std::vector<Eigen::Index>& train_rows,
                               const std::string& selector_name,
                               const ComboConfig& config, std::uint64_t seed);

struct ResidualBins {
  std::vector<double> edges;   // lower edges: 0, 50, 100, 500, 1000
  std::vector<std::size_t> counts;
  std::vector<double> percentages;
  double mean_abs_error = 0;
};

/// Bins |y - prediction| into the fixed gram edges.
ResidualBins residual_analysis(const TrainedModel& model, const DataMatrix& x_eval,
                               const VectorXd& y_eval);

struct ImportanceEntry {
  std::string feature;
  double share = 0;
};

// Split-gain shares per feature, summed over all trees and normalized to 1.
// Only defined for tree families.
std::vector<ImportanceEntry> feature_importance_report(const TrainedModel& model);

struct SexGapReport {
  double gap = 0;  // mean(group 1) - mean(group 0)
  double ci_low = 0;
  double ci_high = 0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
};

/// Mean target difference between the sex column's two levels, Welch 95% CI.
SexGapReport sex_gap(const DataMatrix& data, const std::string& target,
                     const std::string& sex_column);

}  // namespace bwlab
