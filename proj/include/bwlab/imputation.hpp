#pragma once

#include <cstdint>
#include <vector>

#include "bwlab/data_matrix.hpp"
#include "bwlab/linear.hpp"

namespace bwlab {

struct ImputationConfig {
  std::size_t mice_cycles = 10;
  std::size_t pmm_donors = 5;
  std::size_t knn_k = 5;
  double ridge_lambda = 1e-3;
  std::uint64_t seed = 0;
};

enum class ImputeMethod { none, knn, mice };

const char* to_string(ImputeMethod method);

struct ImputationResult {
  DataMatrix completed;
  std::vector<double> trace;  // per-cycle mean |change| of imputed continuous cells
  std::vector<ImputeMethod> per_column_method;
  std::size_t knn_mode_fallbacks = 0;  // cells imputed by column mode for lack of donors
};

struct KnnImputeResult {
  DataMatrix data;
  std::size_t mode_fallbacks = 0;
};

// Fills missing cells of discrete columns. Row distance is squared Euclidean
// on z-scored continuous coordinates plus Hamming on discrete ones, over
// coordinates observed in both rows, rescaled by (usable coords / shared
// coords); the imputed value is the mode of the k nearest donors (distance
// ties resolved by row index, mode ties by smallest value).
KnnImputeResult knn_impute_discrete(const DataMatrix& data,
                                    const ImputationConfig& config);

// Chained equations over continuous columns (discrete ones must already be
// complete): mean-initialize, then per cycle revisit columns in increasing-
// missingness order, fitting a ridge of each column on all others and drawing
// every missing cell from the pmm_donors observed rows with nearest
// predictions. Imputed values are always observed values of their column.
ImputationResult mice_impute_continuous(const DataMatrix& data,
                                        const ImputationConfig& config);

/// knn_impute_discrete followed by mice_impute_continuous.
ImputationResult hybrid_impute(const DataMatrix& data, const ImputationConfig& config);

// Frozen imputer: the completed training matrix acts as the donor pool, and
// the per-cycle ridge models learned during training replay on new rows
// without refitting, so transforming a row never reads any other new row.
struct ImputationModel {
  ImputationConfig config;
  ImputationResult train;
  VectorXd column_mean;  // training-column statistics for init and z-scoring
  VectorXd column_sd;
  struct VisitColumn {
    Eigen::Index column = 0;
    std::vector<double> donor_values;  // originally observed entries, row order
    struct Cycle {
      VectorXd beta;  // raw-scale coefficients over the other columns
      double intercept = 0;
      std::vector<double> donor_predictions;  // aligned with donor_values
    };
    std::vector<Cycle> cycles;
  };
  std::vector<VisitColumn> visits;  // increasing-missingness order
};

/// hybrid_impute that additionally freezes the fitted models for transform.
ImputationModel fit_imputer(const DataMatrix& data, const ImputationConfig& config);

/// Completes rows using only the frozen model and its training donor pool.
DataMatrix impute_with(const ImputationModel& model, const DataMatrix& rows);

enum class MissingMechanism { mcar, mar, mnar };

const char* to_string(MissingMechanism mechanism);
MissingMechanism missing_mechanism_from_string(const std::string& name);

struct MaskedCell {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double value = 0;
};

struct MaskedData {
  DataMatrix data;
  std::vector<MaskedCell> cells;
};

// Hides known entries of a complete matrix for imputation benchmarks.
// mcar: iid Bernoulli(rate). mar: per-column logistic in the z-score of a
// different column. mnar: logistic in the cell's own z-score. The logistic
// intercepts are calibrated so the expected rate equals the request.
MaskedData mask_known_entries(const DataMatrix& data, double rate,
                              MissingMechanism mechanism, std::uint64_t seed);

}  // namespace bwlab
