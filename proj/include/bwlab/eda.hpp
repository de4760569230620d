#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bwlab/data_matrix.hpp"

namespace bwlab {

struct ColumnSummary {
  std::size_t count = 0;  // observed entries
  double mean = 0, sd = 0, min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
  // All statistics are NaN markers when count == 0.
};

struct SummaryStats {
  std::vector<std::string> column_names;
  std::vector<ColumnSummary> columns;
};

struct MissingnessProfile {
  double overall_rate = 0;
  std::vector<double> per_column_rate;
  std::size_t pattern_count = 0;  // distinct row mask patterns
};

struct McarTestResult {
  double d2 = 0;
  std::size_t df = 0;
  double p_value = 1.0;
  bool applicable = false;
  bool ridge_stabilized = false;  // a pattern covariance needed stabilizing
  std::size_t patterns_used = 0;
  std::size_t em_iterations = 0;
  bool em_converged = false;
};

struct DistributionFit {
  Distribution distribution = Distribution::unknown;
  double aic = 0;
  double param1 = 0, param2 = 0;  // fitted parameters, meaning per family
};

struct DistributionVerdict {
  Distribution distribution = Distribution::unknown;
  std::vector<DistributionFit> candidates;  // per-candidate AIC table
};

/// Counts per distribution class across columns (the five-row table shape).
struct DistributionTable {
  std::size_t gaussian = 0, lognormal = 0, uniform = 0, gamma = 0, discrete = 0;
  std::size_t poisson = 0, exponential = 0, unknown = 0;
};

/// Observed-only statistics; quartiles by linear interpolation between order
/// statistics. Zero-observed columns report NaN markers, not an error.
SummaryStats summarize(const DataMatrix& data);

/// Interpolated quantile of unsorted values (fraction in [0,1]).
double quantile(std::span<const double> values, double fraction);

inline constexpr std::size_t kMinSamplesForClassification = 30;

// A gamma or lognormal fit whose implied skewness falls below this floor sits
// in the gaussian limit of its family (shape -> inf, sigma -> 0) and is not
// separable from the gaussian candidate at realistic sample sizes, so it is
// reported in the candidate table but does not compete for the verdict.
inline constexpr double kGaussianLimitSkewness = 0.35;

// Candidate fits: gaussian always; lognormal/gamma/exponential only on
// positive data; uniform by min/max MLE. The verdict is the minimal-AIC
// candidate among competing fits. Discrete columns resolve to poisson when
// mean and variance agree within 20% on nonnegative-integer support,
// otherwise to discrete.
DistributionVerdict classify_distribution(std::span<const double> observed,
                                          ColumnKind kind);

/// Classifies every column and stamps the verdict into the returned copy's
/// metadata.
DataMatrix classify_columns(const DataMatrix& data);

DistributionTable tabulate_distributions(const DataMatrix& classified);

MissingnessProfile missingness_profile(const DataMatrix& data);

struct McarConfig {
  std::size_t max_em_iterations = 100;
  double em_tolerance = 1e-8;  // log-likelihood gain threshold
};

// Little's chi-square test of MCAR over the given continuous columns (all
// continuous columns when unset). Grand mean and covariance come from an EM
// fit of a multivariate normal to the incomplete data; the statistic compares
// pattern-wise means against the EM estimate on each pattern's observed
// coordinates. Patterns need at least two rows to enter the statistic.
McarTestResult little_mcar_test(const DataMatrix& data,
                                const std::optional<std::vector<std::string>>& columns = std::nullopt,
                                const McarConfig& config = {});

}  // namespace bwlab
