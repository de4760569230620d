#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bwlab/linear.hpp"

namespace bwlab {

struct SelectorConfig {
  std::size_t top_k = 20;
  std::size_t mi_bins = 10;
  std::size_t forward_folds = 5;
  double forward_min_improvement = 1e-6;
  double rfe_lambda = 1.0;
  double ridge_lambda = 1.0;
  std::size_t lasso_path_points = 50;
  std::size_t lasso_cv_folds = 5;
  std::size_t cart_max_depth = 6;
  std::size_t cart_min_leaf = 5;
  std::size_t mars_max_terms = 40;
  std::size_t mars_knots_per_feature = 25;
  std::size_t bart_trees = 50;
  std::size_t bart_burn_in = 200;
  std::size_t bart_draws = 500;
  std::uint64_t seed = 0;
};

struct RankedFeature {
  std::string name;
  double score = 0;
};

struct SelectorReport {
  std::string selector_name;
  std::vector<RankedFeature> ranked;  // non-increasing score, ties by column
  std::map<std::string, std::string> metadata;
};

// Every selector scores the columns of a complete design against y and
// returns the top min(top_k, columns) of them. Scores are always finite.
using SelectorFn = SelectorReport (*)(const MatrixXd&, const VectorXd&,
                                      const std::vector<std::string>&,
                                      const SelectorConfig&);

SelectorReport pearson_rank(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport anova_f_rank(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport mutual_info_rank(const MatrixXd& x, const VectorXd& y,
                                const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport kendall_rank(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport inmifs_select(const MatrixXd& x, const VectorXd& y,
                             const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport forward_select(const MatrixXd& x, const VectorXd& y,
                              const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport rfe_select(const MatrixXd& x, const VectorXd& y,
                          const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport lasso_select(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport ridge_rank(const MatrixXd& x, const VectorXd& y,
                          const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport tree_importance_rank(const MatrixXd& x, const VectorXd& y,
                                    const std::vector<std::string>& names,
                                    const SelectorConfig& cfg);
SelectorReport mars_select(const MatrixXd& x, const VectorXd& y,
                           const std::vector<std::string>& names, const SelectorConfig& cfg);
SelectorReport bart_select(const MatrixXd& x, const VectorXd& y,
                           const std::vector<std::string>& names, const SelectorConfig& cfg);

struct SelectorEntry {
  std::string name;
  SelectorFn fn;
};

/// The twelve selectors in canonical order.
const std::vector<SelectorEntry>& all_selectors();

/// Looks up a selector by name and runs it. Unknown names throw UsageError.
SelectorReport run_selector(const std::string& name, const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg);

struct ConsensusEntry {
  std::string name;
  std::size_t frequency = 0;  // how many reports ranked the feature
  double borda = 0;           // sum of (top_k - rank), rank 1-based
};

struct ConsensusReport {
  std::vector<ConsensusEntry> entries;  // frequency desc, borda desc, column asc
};

// Cross-selector agreement. column_order fixes the tie order; features absent
// from it sort after it alphabetically.
ConsensusReport consensus_rank(const std::vector<SelectorReport>& reports, std::size_t top_k,
                               const std::vector<std::string>& column_order = {});

// Kendall tau-b with tie correction. All-tied input on either side gives 0.
double kendall_tau_b(const VectorXd& a, const VectorXd& b);

// Equal-frequency bin ids (0..bins-1) from interior quantile edges; equal
// values always share a bin, so some ids may be unused.
std::vector<int> equal_frequency_bins(const VectorXd& v, std::size_t bins);

/// Shannon entropy in nats of a binned variable.
double binned_entropy(const std::vector<int>& bins_a, std::size_t bins);

/// Plug-in mutual information in nats of two binned variables.
double binned_mutual_information(const std::vector<int>& bins_a, const std::vector<int>& bins_b,
                                 std::size_t bins);

}  // namespace bwlab
