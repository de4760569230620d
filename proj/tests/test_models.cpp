#include "bwlab/models.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "bwlab/rng.hpp"

using namespace bwlab;

namespace {

MatrixXd random_matrix(Rng& rng, Eigen::Index n, Eigen::Index p) {
  MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  return x;
}

std::vector<std::string> feature_names(Eigen::Index q) {
  std::vector<std::string> names(static_cast<std::size_t>(q));
  for (Eigen::Index j = 0; j < q; ++j)
    names[static_cast<std::size_t>(j)] = "x" + std::to_string(j);
  return names;
}

// Exhaustive O(n^2 p) search over every (feature, midpoint) split.
struct OracleSplit {
  Eigen::Index feature = -1;
  double threshold = 0;
  double gain = 0;
};

OracleSplit brute_force_split(const MatrixXd& x, const VectorXd& y,
                              std::size_t min_leaf) {
  const Eigen::Index n = x.rows();
  const double total = y.sum();
  const double parent = total * total / static_cast<double>(n);
  OracleSplit best;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> values(x.col(j).data(), x.col(j).data() + n);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      const double threshold = 0.5 * (values[v] + values[v + 1]);
      double left_sum = 0;
      Eigen::Index n_left = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (x(i, j) <= threshold) {
          left_sum += y(i);
          ++n_left;
        }
      const Eigen::Index n_right = n - n_left;
      if (n_left < static_cast<Eigen::Index>(min_leaf) ||
          n_right < static_cast<Eigen::Index>(min_leaf))
        continue;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                          right_sum * right_sum / static_cast<double>(n_right) -
                          parent;
      if (gain > best.gain) best = {j, threshold, gain};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("cart: constant response grows no splits and predicts the mean") {
  Rng rng(501);
  const MatrixXd x = random_matrix(rng, 60, 4);
  const VectorXd y = VectorXd::Constant(60, 5.5);

  const CartTree tree = CartTree::fit(x, y, {});
  CHECK(tree.leaf_count() == 1);
  CHECK(tree.nodes().size() == 1);
  CHECK(tree.predict(x)(17) == 5.5);
  CHECK(tree.importance(4).maxCoeff() == 0.0);
}

TEST_CASE("cart: root split matches the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(Rng::derive(502, seed));
    const MatrixXd x = random_matrix(rng, 50, 3);
    VectorXd y(50);
    for (Eigen::Index i = 0; i < 50; ++i)
      y(i) = 2.0 * x(i, 1) + 0.3 * rng.normal();

    CartConfig config;
    config.max_depth = 1;
    config.min_leaf = 5;
    const CartTree tree = CartTree::fit(x, y, config);
    const OracleSplit oracle = brute_force_split(x, y, 5);

    REQUIRE(tree.nodes().front().feature >= 0);
    CHECK(tree.nodes().front().feature == oracle.feature);
    CHECK(tree.nodes().front().threshold == doctest::Approx(oracle.threshold).epsilon(1e-12));
    CHECK(tree.nodes().front().gain == doctest::Approx(oracle.gain).epsilon(1e-9));
  }
}

TEST_CASE("cart: leaves respect min_leaf and predictions are piecewise constant") {
  Rng rng(503);
  const MatrixXd x = random_matrix(rng, 200, 5);
  VectorXd y(200);
  for (Eigen::Index i = 0; i < 200; ++i)
    y(i) = std::sin(x(i, 0)) + 0.5 * x(i, 2) + 0.2 * rng.normal();

  CartConfig config;
  config.max_depth = 6;
  config.min_leaf = 7;
  const CartTree tree = CartTree::fit(x, y, config);

  // Count rows per leaf by routing the training set.
  std::map<const void*, std::size_t> leaf_rows;
  for (Eigen::Index i = 0; i < 200; ++i) {
    int at = 0;
    while (tree.nodes()[static_cast<std::size_t>(at)].feature >= 0) {
      const TreeNode& node = tree.nodes()[static_cast<std::size_t>(at)];
      at = x(i, node.feature) <= node.threshold ? node.left : node.right;
    }
    ++leaf_rows[&tree.nodes()[static_cast<std::size_t>(at)]];
  }
  for (const auto& [leaf, rows] : leaf_rows) CHECK(rows >= 7);

  const VectorXd predictions = tree.predict(x);
  std::set<double> distinct(predictions.data(), predictions.data() + 200);
  CHECK(distinct.size() <= tree.leaf_count());
}

TEST_CASE("cart: step function concentrates importance on its feature") {
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(Rng::derive(504, seed));
    const MatrixXd x = random_matrix(rng, 150, 6);
    VectorXd y(150);
    for (Eigen::Index i = 0; i < 150; ++i)
      y(i) = (x(i, 3) > 0.2 ? 4.0 : -1.0) + 0.1 * rng.normal();

    const CartTree tree = CartTree::fit(x, y, {});
    const VectorXd gains = tree.importance(6);
    if (gains(3) / gains.sum() >= 0.9) ++hits;
  }
  CHECK(hits >= 19);
}

TEST_CASE("ols: exact recovery, residual orthogonality, thin-data stabilization") {
  Rng rng(510);
  const MatrixXd x = random_matrix(rng, 80, 4);
  VectorXd truth(4);
  truth << 1.5, -2.0, 0.0, 4.0;
  const VectorXd y = (x * truth).array() + 7.0;

  ModelSpec spec;
  spec.family = ModelFamily::ols;
  const TrainedModel model = fit(spec, x, y, feature_names(4));
  CHECK((model.coefficients - truth).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(model.intercept == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(model.warnings.empty());

  const VectorXd noisy = y + random_matrix(rng, 80, 1).col(0);
  const TrainedModel loose = fit(spec, x, noisy, feature_names(4));
  const VectorXd residual = noisy - loose.predict(x);
  CHECK(std::abs(residual.sum()) < 1e-8);  // intercept column orthogonality
  CHECK((x.transpose() * residual).cwiseAbs().maxCoeff() <
        1e-8 * x.norm() * noisy.norm());

  const MatrixXd thin = random_matrix(rng, 7, 4);
  const VectorXd thin_y = thin.col(0);
  const TrainedModel stabilized = fit(spec, thin, thin_y, feature_names(4));
  REQUIRE(stabilized.warnings.size() == 1);
  CHECK(stabilized.warnings.front().find("ridge-stabilized") != std::string::npos);
}

TEST_CASE("ridge: vanishing penalty matches ols") {
  Rng rng(511);
  const MatrixXd x = random_matrix(rng, 90, 5);
  const VectorXd y = x * random_matrix(rng, 5, 1).col(0) + 0.3 * random_matrix(rng, 90, 1).col(0);

  ModelSpec ridge_spec;
  ridge_spec.family = ModelFamily::ridge;
  ridge_spec.params = {{"lambda", 1e-10}};
  ModelSpec ols_spec;
  ols_spec.family = ModelFamily::ols;

  const TrainedModel a = fit(ridge_spec, x, y, feature_names(5));
  const TrainedModel b = fit(ols_spec, x, y, feature_names(5));
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-6));
}

TEST_CASE("lasso: saturating penalty zeroes coefficients and leaves the mean") {
  Rng rng(512);
  const MatrixXd x = random_matrix(rng, 70, 6);
  const VectorXd y = x.col(2) * 3.0 + random_matrix(rng, 70, 1).col(0);

  ModelSpec spec;
  spec.family = ModelFamily::lasso;
  spec.params = {{"lambda_ratio", 1.0}};
  const TrainedModel model = fit(spec, x, y, feature_names(6));
  CHECK(model.coefficients.cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.intercept == doctest::Approx(y.mean()).epsilon(1e-12));

  spec.params = {{"lambda_ratio", 0.001}};
  const TrainedModel loose = fit(spec, x, y, feature_names(6));
  CHECK(loose.coefficients(2) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("bayesian_ridge: recovers a well-determined signal and its noise level") {
  Rng rng(513);
  const MatrixXd x = random_matrix(rng, 400, 3);
  VectorXd truth(3);
  truth << 2.0, -1.0, 0.5;
  VectorXd y = (x * truth).array() + 3.0;
  for (Eigen::Index i = 0; i < 400; ++i) y(i) += 0.5 * rng.normal();

  ModelSpec spec;
  spec.family = ModelFamily::bayesian_ridge;
  const TrainedModel model = fit(spec, x, y, feature_names(3));
  CHECK((model.coefficients - truth).cwiseAbs().maxCoeff() < 0.1);
  CHECK(model.intercept == doctest::Approx(3.0).epsilon(0.05));
  // noise precision ~ 1/0.25
  CHECK(model.noise_precision > 2.0);
  CHECK(model.noise_precision < 8.0);
  CHECK(model.weight_precision > 0);
}

TEST_CASE("gradient_boosting: base prediction is the response mean") {
  Rng rng(514);
  const MatrixXd x = random_matrix(rng, 50, 3);
  const VectorXd y = x.col(0) * 2.0;

  ModelSpec spec;
  spec.family = ModelFamily::gradient_boosting;
  spec.params = {{"stages", 5}};
  const TrainedModel model = fit(spec, x, y, feature_names(3));
  CHECK(model.base_prediction == y.mean());
}

TEST_CASE("gradient_boosting: training mse never increases stage over stage") {
  Rng rng(515);
  const MatrixXd x = random_matrix(rng, 120, 5);
  VectorXd y(120);
  for (Eigen::Index i = 0; i < 120; ++i)
    y(i) = x(i, 0) * x(i, 1) + std::abs(x(i, 2)) + 0.3 * rng.normal();

  ModelSpec spec;
  spec.family = ModelFamily::gradient_boosting;
  spec.params = {{"stages", 80}};
  const TrainedModel model = fit(spec, x, y, feature_names(5));
  REQUIRE(model.stage_train_mse.size() == 80);
  for (std::size_t m = 1; m < 80; ++m)
    CHECK(model.stage_train_mse[m] <= model.stage_train_mse[m - 1]);

  // The ensemble actually learned the signal.
  const double final_mse = model.stage_train_mse.back();
  const double var = (y.array() - y.mean()).square().mean();
  CHECK(final_mse < 0.5 * var);
}

TEST_CASE("adaboost_r2: a single learner is the prediction itself") {
  Rng rng(516);
  const MatrixXd x = random_matrix(rng, 60, 3);
  const VectorXd y = x.col(1).array().sin().matrix() + x.col(0);

  ModelSpec spec;
  spec.family = ModelFamily::adaboost_r2;
  spec.params = {{"learners", 1}};
  const TrainedModel model = fit(spec, x, y, feature_names(3));
  REQUIRE(model.trees.size() == 1);
  CHECK((model.predict(x) - model.trees.front().predict(x)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("adaboost_r2: boosting reduces training error against one stump") {
  Rng rng(517);
  const MatrixXd x = random_matrix(rng, 200, 4);
  VectorXd y(200);
  for (Eigen::Index i = 0; i < 200; ++i)
    y(i) = 2.0 * x(i, 0) - x(i, 3) + 0.2 * rng.normal();

  ModelSpec one;
  one.family = ModelFamily::adaboost_r2;
  one.params = {{"learners", 1}, {"max_depth", 2}};
  ModelSpec many = one;
  many.params["learners"] = 40;

  const double mse_one = (fit(one, x, y, feature_names(4)).predict(x) - y).squaredNorm();
  const double mse_many = (fit(many, x, y, feature_names(4)).predict(x) - y).squaredNorm();
  CHECK(mse_many < mse_one);
}

TEST_CASE("random_forest: degenerate forest equals a single cart") {
  Rng rng(518);
  const MatrixXd x = random_matrix(rng, 100, 4);
  const VectorXd y = x.col(0).array().square().matrix() + x.col(2);

  ModelSpec forest;
  forest.family = ModelFamily::random_forest;
  forest.params = {{"trees", 1}, {"mtry", 4}, {"bootstrap", 0},
                   {"max_depth", 6}, {"min_leaf", 5}};
  ModelSpec cart;
  cart.family = ModelFamily::cart;
  cart.params = {{"max_depth", 6}, {"min_leaf", 5}};

  const VectorXd a = fit(forest, x, y, feature_names(4)).predict(x);
  const VectorXd b = fit(cart, x, y, feature_names(4)).predict(x);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random_forest: adding trees does not perturb earlier trees") {
  Rng rng(519);
  const MatrixXd x = random_matrix(rng, 80, 5);
  const VectorXd y = x.col(1) * 2.0 + x.col(4);

  ModelSpec spec;
  spec.family = ModelFamily::random_forest;
  spec.seed = 42;
  spec.params = {{"trees", 3}};
  const TrainedModel small = fit(spec, x, y, feature_names(5));
  spec.params = {{"trees", 6}};
  const TrainedModel large = fit(spec, x, y, feature_names(5));

  REQUIRE(small.trees.size() == 3);
  REQUIRE(large.trees.size() == 6);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto& a = small.trees[t].nodes();
    const auto& b = large.trees[t].nodes();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].feature == b[k].feature);
      CHECK(a[k].threshold == b[k].threshold);
      CHECK(a[k].value == b[k].value);
    }
  }

  // Bitwise reproducibility of the whole ensemble.
  const TrainedModel again = fit(spec, x, y, feature_names(5));
  CHECK((large.predict(x) - again.predict(x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predict by name: column order does not matter, unknown names throw") {
  Rng rng(520);
  const MatrixXd x = random_matrix(rng, 40, 3);
  const VectorXd y = x.col(0) + 2.0 * x.col(2);

  ModelSpec spec;
  spec.family = ModelFamily::ols;
  const TrainedModel model = fit(spec, x, y, {"a", "b", "c"});

  MatrixXd shuffled(40, 3);
  shuffled.col(0) = x.col(2);
  shuffled.col(1) = x.col(0);
  shuffled.col(2) = x.col(1);
  const DataMatrix data = DataMatrix::complete(shuffled, {"c", "a", "b"});
  CHECK((model.predict(data) - model.predict(x)).cwiseAbs().maxCoeff() < 1e-12);

  const DataMatrix wrong = DataMatrix::complete(shuffled, {"c", "a", "zzz"});
  CHECK_THROWS_WITH_AS(model.predict(wrong), doctest::Contains("b"), DataError);
}

TEST_CASE("fit rejects empty, mismatched, and non-finite inputs") {
  Rng rng(521);
  const MatrixXd x = random_matrix(rng, 20, 2);
  const VectorXd y = x.col(0);

  ModelSpec spec;
  spec.family = ModelFamily::ols;
  CHECK_THROWS_AS(fit(spec, MatrixXd(20, 0), y, {}), DataError);

  MatrixXd bad = x;
  bad(3, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit(spec, bad, y, feature_names(2)), DataError);

  VectorXd bad_y = y;
  bad_y(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fit(spec, x, bad_y, feature_names(2)), DataError);

  spec.params = {{"nonsense", 1.0}};
  CHECK_THROWS_AS(fit(spec, x, y, feature_names(2)), UsageError);
}

TEST_CASE("row permutation leaves every linear family's coefficients unchanged") {
  Rng rng(522);
  const MatrixXd x = random_matrix(rng, 150, 4);
  VectorXd y = x.col(0) - 2.0 * x.col(3);
  for (Eigen::Index i = 0; i < 150; ++i) y(i) += 0.4 * rng.normal();

  const auto perm = rng.permutation(150);
  MatrixXd xp(150, 4);
  VectorXd yp(150);
  for (Eigen::Index i = 0; i < 150; ++i) {
    xp.row(i) = x.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
    yp(i) = y(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
  }

  for (ModelFamily family : {ModelFamily::ols, ModelFamily::ridge, ModelFamily::lasso,
                             ModelFamily::bayesian_ridge}) {
    ModelSpec spec;
    spec.family = family;
    const TrainedModel a = fit(spec, x, y, feature_names(4));
    const TrainedModel b = fit(spec, xp, yp, feature_names(4));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(a.intercept - b.intercept) < 1e-10);
  }
}

TEST_CASE("default_grid: published sizes and smoke fits") {
  CHECK(default_grid(ModelFamily::ols, 10).size() == 1);
  CHECK(default_grid(ModelFamily::bayesian_ridge, 10).size() == 1);
  CHECK(default_grid(ModelFamily::ridge, 10).size() == 4);
  CHECK(default_grid(ModelFamily::lasso, 10).size() == 20);
  CHECK(default_grid(ModelFamily::cart, 10).size() == 6);
  CHECK(default_grid(ModelFamily::gradient_boosting, 10).size() == 8);
  CHECK(default_grid(ModelFamily::adaboost_r2, 10).size() == 2);
  const auto forest = default_grid(ModelFamily::random_forest, 10);
  CHECK(forest.size() == 1);  // ceil(10/3) == ceil(sqrt(10)) == 4 collapses
  CHECK(default_grid(ModelFamily::random_forest, 100).size() == 2);

  Rng rng(523);
  const MatrixXd x = random_matrix(rng, 100, 10);
  VectorXd y = x.col(0) + x.col(5);
  for (Eigen::Index i = 0; i < 100; ++i) y(i) += 0.2 * rng.normal();
  for (ModelFamily family : all_model_families()) {
    for (const HyperParams& point : default_grid(family, 10)) {
      ModelSpec spec;
      spec.family = family;
      spec.params = point;
      spec.seed = 9;
      if (family == ModelFamily::random_forest) spec.params["trees"] = 10;
      if (family == ModelFamily::gradient_boosting) spec.params["stages"] = 10;
      const TrainedModel model = fit(spec, x, y, feature_names(10));
      CHECK(model.predict(x).allFinite());
    }
  }
}

TEST_CASE("tree_gain_totals: single split takes the full share, linear families refuse") {
  Rng rng(524);
  const MatrixXd x = random_matrix(rng, 60, 3);
  VectorXd y(60);
  for (Eigen::Index i = 0; i < 60; ++i) y(i) = x(i, 1) > 0 ? 1.0 : 0.0;

  ModelSpec spec;
  spec.family = ModelFamily::cart;
  spec.params = {{"max_depth", 1}, {"min_leaf", 5}};
  const TrainedModel model = fit(spec, x, y, feature_names(3));
  const VectorXd gains = tree_gain_totals(model);
  CHECK(gains(1) == gains.sum());
  CHECK(gains(1) > 0);

  ModelSpec linear;
  linear.family = ModelFamily::ridge;
  CHECK_THROWS_AS(tree_gain_totals(fit(linear, x, y, feature_names(3))), UsageError);
}
