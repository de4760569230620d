#include "bwlab/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bwlab/errors.hpp"

namespace bwlab {

namespace {

// Shared per-fit workspace. Every feature keeps the node's rows sorted by its
// own values in order_[j][lo..hi); splits stable-partition each range so both
// children inherit sorted order without re-sorting.
struct Builder {
  const MatrixXd& x;
  const VectorXd& y;
  const CartConfig& config;
  std::vector<std::vector<int>> order;
  std::vector<char> goes_left;   // indexed by row id
  std::vector<int> scratch;      // stable-partition buffer
  std::vector<Eigen::Index> feature_pool;
  std::vector<TreeNode> nodes;

  Builder(const MatrixXd& x_in, const VectorXd& y_in, const CartConfig& c)
      : x(x_in), y(y_in), config(c) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    order.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
      auto& idx = order[static_cast<std::size_t>(j)];
      idx.resize(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(),
                [&](int a, int b) { return x(a, j) < x(b, j); });
    }
    goes_left.resize(static_cast<std::size_t>(n));
    scratch.resize(static_cast<std::size_t>(n));
    feature_pool.resize(static_cast<std::size_t>(p));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
  }

  struct Split {
    double gain = 0;
    Eigen::Index feature = -1;
    double threshold = 0;
  };

  Split best_split(int lo, int hi, double node_sum, double node_sumsq) {
    const double n_node = static_cast<double>(hi - lo);
    const double parent_score = node_sum * node_sum / n_node;
    // Constant-response guard: no split can reduce a (numerically) zero SSE.
    const double node_sse = node_sumsq - parent_score;
    const double floor = 1e-12 * std::max(node_sumsq, 1.0);
    Split best;
    if (node_sse <= floor) return best;

    const Eigen::Index p = x.cols();
    const Eigen::Index* features = feature_pool.data();
    Eigen::Index feature_count = p;
    if (config.mtry > 0 && config.mtry < static_cast<std::size_t>(p)) {
      // Partial Fisher-Yates over the pool; scanning stays in index order.
      for (std::size_t k = 0; k < config.mtry; ++k) {
        const std::size_t pick =
            k + static_cast<std::size_t>(
                    config.rng->below(static_cast<std::uint64_t>(
                        static_cast<std::size_t>(p) - k)));
        std::swap(feature_pool[k], feature_pool[pick]);
      }
      std::sort(feature_pool.begin(),
                feature_pool.begin() + static_cast<std::ptrdiff_t>(config.mtry));
      feature_count = static_cast<Eigen::Index>(config.mtry);
    }

    for (Eigen::Index fi = 0; fi < feature_count; ++fi) {
      const Eigen::Index j = features[fi];
      const auto& idx = order[static_cast<std::size_t>(j)];
      double left_sum = 0;
      for (int i = lo; i + 1 < hi; ++i) {
        left_sum += y(idx[static_cast<std::size_t>(i)]);
        const double lo_value = x(idx[static_cast<std::size_t>(i)], j);
        const double hi_value = x(idx[static_cast<std::size_t>(i + 1)], j);
        if (lo_value == hi_value) continue;
        const double n_left = static_cast<double>(i - lo + 1);
        const double n_right = n_node - n_left;
        if (n_left < static_cast<double>(config.min_leaf) ||
            n_right < static_cast<double>(config.min_leaf))
          continue;
        const double right_sum = node_sum - left_sum;
        const double gain = left_sum * left_sum / n_left +
                            right_sum * right_sum / n_right - parent_score;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = j;
          best.threshold = 0.5 * (lo_value + hi_value);
        }
      }
    }
    if (best.gain <= floor) best.feature = -1;
    return best;
  }

  int build(int lo, int hi, int depth, double node_sum, double node_sumsq) {
    const int me = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(me)].value =
        node_sum / static_cast<double>(hi - lo);

    if (depth >= config.max_depth ||
        static_cast<std::size_t>(hi - lo) < 2 * config.min_leaf)
      return me;
    const Split split = best_split(lo, hi, node_sum, node_sumsq);
    if (split.feature < 0) return me;

    double left_sum = 0, left_sumsq = 0;
    int n_left = 0;
    for (int i = lo; i < hi; ++i) {
      const int row = order[static_cast<std::size_t>(split.feature)]
                           [static_cast<std::size_t>(i)];
      const bool left = x(row, split.feature) <= split.threshold;
      goes_left[static_cast<std::size_t>(row)] = left ? 1 : 0;
      if (left) {
        left_sum += y(row);
        left_sumsq += y(row) * y(row);
        ++n_left;
      }
    }

    // Stable partition of every feature's range keeps per-feature order.
    for (auto& idx : order) {
      int write_left = lo, write_right = 0;
      for (int i = lo; i < hi; ++i) {
        const int row = idx[static_cast<std::size_t>(i)];
        if (goes_left[static_cast<std::size_t>(row)])
          idx[static_cast<std::size_t>(write_left++)] = row;
        else
          scratch[static_cast<std::size_t>(write_right++)] = row;
      }
      std::copy(scratch.begin(), scratch.begin() + write_right,
                idx.begin() + write_left);
    }

    const int mid = lo + n_left;
    nodes[static_cast<std::size_t>(me)].feature = split.feature;
    nodes[static_cast<std::size_t>(me)].threshold = split.threshold;
    nodes[static_cast<std::size_t>(me)].gain = split.gain;
    const int left_child =
        build(lo, mid, depth + 1, left_sum, left_sumsq);
    const int right_child =
        build(mid, hi, depth + 1, node_sum - left_sum, node_sumsq - left_sumsq);
    nodes[static_cast<std::size_t>(me)].left = left_child;
    nodes[static_cast<std::size_t>(me)].right = right_child;
    return me;
  }
};

}  // namespace

CartTree CartTree::fit(const MatrixXd& x, const VectorXd& y, const CartConfig& config) {
  if (x.rows() == 0 || x.cols() == 0) throw DataError("cart requires a nonempty design");
  if (x.rows() != y.size()) throw DataError("cart design and response sizes differ");
  if (config.mtry > 0 && config.mtry < static_cast<std::size_t>(x.cols()) &&
      config.rng == nullptr)
    throw UsageError("cart feature subsampling needs an rng");

  Builder builder(x, y, config);
  builder.nodes.reserve(64);
  builder.build(0, static_cast<int>(x.rows()), 0, y.sum(), y.squaredNorm());

  CartTree tree;
  tree.nodes_ = std::move(builder.nodes);
  return tree;
}

CartTree CartTree::from_nodes(std::vector<TreeNode> nodes) {
  CartTree tree;
  tree.nodes_ = std::move(nodes);
  return tree;
}

double CartTree::predict_row(const MatrixXd& x, Eigen::Index row) const {
  int at = 0;
  while (nodes_[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& node = nodes_[static_cast<std::size_t>(at)];
    at = x(row, node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes_[static_cast<std::size_t>(at)].value;
}

VectorXd CartTree::predict(const MatrixXd& x) const {
  VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_row(x, i);
  return out;
}

VectorXd CartTree::importance(Eigen::Index feature_count) const {
  VectorXd gains = VectorXd::Zero(feature_count);
  for (const TreeNode& node : nodes_)
    if (node.feature >= 0) gains(node.feature) += node.gain;
  return gains;
}

std::size_t CartTree::leaf_count() const {
  std::size_t count = 0;
  for (const TreeNode& node : nodes_)
    if (node.feature < 0) ++count;
  return count;
}

}  // namespace bwlab
