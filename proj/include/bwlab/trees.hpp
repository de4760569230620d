#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "bwlab/rng.hpp"

namespace bwlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CartConfig {
  int max_depth = 6;
  std::size_t min_leaf = 5;
  std::size_t mtry = 0;  // features scanned per split; 0 means all
  Rng* rng = nullptr;    // consulted only when 0 < mtry < p
};

struct TreeNode {
  Eigen::Index feature = -1;  // -1 marks a leaf
  double threshold = 0;
  double value = 0;  // leaf prediction (mean of its rows)
  double gain = 0;   // sum-of-squares reduction of the split
  int left = -1;
  int right = -1;
};

// Regression tree with variance-reduction splits. Thresholds are midpoints of
// consecutive distinct sorted values, scanned exhaustively; ties in gain keep
// the lowest feature index and then the smallest threshold, so structure is
// deterministic. Rows go left when value <= threshold.
class CartTree {
 public:
  static CartTree fit(const MatrixXd& x, const VectorXd& y, const CartConfig& config);
  static CartTree from_nodes(std::vector<TreeNode> nodes);

  double predict_row(const MatrixXd& x, Eigen::Index row) const;
  VectorXd predict(const MatrixXd& x) const;

  /// Per-feature sum of split gains (unnormalized).
  VectorXd importance(Eigen::Index feature_count) const;

  std::size_t leaf_count() const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

}  // namespace bwlab
