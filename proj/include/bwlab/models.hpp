#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bwlab/data_matrix.hpp"
#include "bwlab/linear.hpp"
#include "bwlab/trees.hpp"

namespace bwlab {

enum class ModelFamily {
  ols,
  ridge,
  lasso,
  bayesian_ridge,
  cart,
  random_forest,
  gradient_boosting,
  adaboost_r2
};

const char* to_string(ModelFamily family);
ModelFamily model_family_from_string(const std::string& name);

/// All known families, in canonical order.
const std::vector<ModelFamily>& all_model_families();

using HyperParams = std::map<std::string, double>;

struct ModelSpec {
  ModelFamily family = ModelFamily::ols;
  HyperParams params;  // family defaults fill unset keys at fit time
  std::uint64_t seed = 0;
};

// Fitted regressor. Linear families populate coefficients/intercept; tree
// families populate trees (with per-tree weights where the family mixes them).
struct TrainedModel {
  ModelFamily family = ModelFamily::ols;
  HyperParams params;  // effective values, defaults applied
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;

  VectorXd coefficients;
  double intercept = 0;
  double noise_precision = 0;   // bayesian_ridge alpha
  double weight_precision = 0;  // bayesian_ridge lambda

  std::vector<CartTree> trees;
  std::vector<double> tree_weights;  // adaboost log(1/beta) stage weights
  double base_prediction = 0;        // gradient_boosting F0
  std::vector<double> stage_train_mse;  // boosting diagnostic, non-increasing

  std::vector<std::string> warnings;

  /// Predicts on columns already aligned with feature_names.
  VectorXd predict(const MatrixXd& x) const;
  /// Predicts by column name in any order; unknown/missing names throw.
  VectorXd predict(const DataMatrix& data) const;
};

/// Trains `spec` on (x, y); feature_names must match x's columns.
TrainedModel fit(const ModelSpec& spec, const MatrixXd& x, const VectorXd& y,
                 std::vector<std::string> feature_names);

/// Hyperparameter grid evaluated by grid search; q is the feature count.
std::vector<HyperParams> default_grid(ModelFamily family, Eigen::Index q);

// Per-feature split-gain totals summed over all trees/stages, unnormalized.
// Throws UsageError for linear families (use coefficient magnitudes instead).
VectorXd tree_gain_totals(const TrainedModel& model);

}  // namespace bwlab
