#include "bwlab/models.hpp"

#include <algorithm>
#include <cmath>

namespace bwlab {

namespace {

struct HyperDef {
  const char* key;
  double fallback;
};

const std::vector<HyperDef>& hyper_defs(ModelFamily family) {
  static const std::vector<HyperDef> none = {};
  static const std::vector<HyperDef> ridge = {{"lambda", 1.0}};
  static const std::vector<HyperDef> lasso = {{"lambda_ratio", 0.01}};
  static const std::vector<HyperDef> cart = {{"max_depth", 6}, {"min_leaf", 5}};
  static const std::vector<HyperDef> forest = {{"trees", 200},
                                               {"mtry", 0},  // 0 = ceil(q/3)
                                               {"max_depth", 16},
                                               {"min_leaf", 2},
                                               {"bootstrap", 1}};
  static const std::vector<HyperDef> boosting = {{"learning_rate", 0.1},
                                                 {"stages", 100},
                                                 {"max_depth", 3},
                                                 {"min_leaf", 5}};
  static const std::vector<HyperDef> adaboost = {
      {"learners", 50}, {"max_depth", 3}, {"min_leaf", 5}};
  switch (family) {
    case ModelFamily::ols:
    case ModelFamily::bayesian_ridge: return none;
    case ModelFamily::ridge: return ridge;
    case ModelFamily::lasso: return lasso;
    case ModelFamily::cart: return cart;
    case ModelFamily::random_forest: return forest;
    case ModelFamily::gradient_boosting: return boosting;
    case ModelFamily::adaboost_r2: return adaboost;
  }
  return none;
}

HyperParams apply_defaults(ModelFamily family, const HyperParams& given) {
  const auto& defs = hyper_defs(family);
  for (const auto& [key, value] : given) {
    (void)value;
    const bool known = std::any_of(defs.begin(), defs.end(), [&](const HyperDef& d) {
      return key == d.key;
    });
    if (!known)
      throw UsageError("unknown hyperparameter '" + key + "' for family " +
                       to_string(family));
  }
  HyperParams params = given;
  for (const HyperDef& d : defs) params.emplace(d.key, d.fallback);
  return params;
}

int int_param(const HyperParams& params, const std::string& key) {
  return static_cast<int>(std::llround(params.at(key)));
}

CartConfig cart_config(const HyperParams& params) {
  CartConfig config;
  config.max_depth = int_param(params, "max_depth");
  config.min_leaf = static_cast<std::size_t>(std::max(1, int_param(params, "min_leaf")));
  if (config.max_depth < 1) throw UsageError("max_depth must be at least 1");
  return config;
}

void fit_linear_raw(TrainedModel& model, const RawRidge& solution) {
  model.coefficients = solution.beta;
  model.intercept = solution.intercept;
}

void fit_ols(TrainedModel& model, const MatrixXd& x, const VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index q = x.cols();
  if (n < 2 * q) {
    model.warnings.push_back("ridge-stabilized: fewer than 2q training rows");
    fit_linear_raw(model, ridge_on_standardized(x, y, 1e-8));
    return;
  }
  MatrixXd design(n, q + 1);
  design.col(0).setOnes();
  design.rightCols(q) = x;
  const VectorXd solution = ols_solve(design, y);
  model.intercept = solution(0);
  model.coefficients = solution.tail(q);
}

void fit_lasso(TrainedModel& model, const MatrixXd& x, const VectorXd& y) {
  const Standardizer s = Standardizer::fit(x);
  const MatrixXd z = s.apply(x);
  const double y_mean = y.mean();
  const VectorXd centered = y.array() - y_mean;

  const double ratio = model.params.at("lambda_ratio");
  if (!(ratio > 0 && ratio <= 1))
    throw UsageError("lambda_ratio must lie in (0, 1]");
  const double lambda = ratio * lasso_lambda_max(z, centered);

  const LassoFit fit = lasso_cd(z, centered, lambda);
  if (!fit.converged)
    throw NumericError("lasso failed to converge at lambda=" + std::to_string(lambda));

  model.coefficients = fit.beta.cwiseQuotient(s.scale);
  model.intercept = y_mean - model.coefficients.dot(s.mean);
}

void fit_bayesian_ridge(TrainedModel& model, const MatrixXd& x, const VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Standardizer s = Standardizer::fit(x);
  const MatrixXd z = s.apply(x);
  const double y_mean = y.mean();
  const VectorXd centered = y.array() - y_mean;

  const Eigen::SelfAdjointEigenSolver<MatrixXd> eigen(z.transpose() * z);
  const VectorXd& spectrum = eigen.eigenvalues();
  const VectorXd projected = eigen.eigenvectors().transpose() * (z.transpose() * centered);

  const double y_var = centered.squaredNorm() / static_cast<double>(n);
  double alpha = y_var > 0 ? 1.0 / y_var : 1.0;  // noise precision
  double lambda = 1.0;                           // weight precision
  VectorXd mean_weights = VectorXd::Zero(z.cols());

  constexpr double kFloor = 1e-12, kCeil = 1e12;
  for (int it = 0; it < 300; ++it) {
    const VectorXd shrink =
        (alpha * projected.array() / (lambda + alpha * spectrum.array())).matrix();
    mean_weights = eigen.eigenvectors() * shrink;
    const double gamma =
        (alpha * spectrum.array() / (lambda + alpha * spectrum.array())).sum();
    const double rss = (centered - z * mean_weights).squaredNorm();

    const double lambda_next =
        std::clamp(gamma / std::max(mean_weights.squaredNorm(), kFloor), kFloor, kCeil);
    const double alpha_next = std::clamp(
        (static_cast<double>(n) - gamma) / std::max(rss, kFloor), kFloor, kCeil);
    const double change = std::max(std::abs(alpha_next - alpha) / alpha,
                                   std::abs(lambda_next - lambda) / lambda);
    alpha = alpha_next;
    lambda = lambda_next;
    if (change < 1e-6) break;
  }

  model.noise_precision = alpha;
  model.weight_precision = lambda;
  model.coefficients = mean_weights.cwiseQuotient(s.scale);
  model.intercept = y_mean - model.coefficients.dot(s.mean);
}

void fit_forest(TrainedModel& model, const MatrixXd& x, const VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index q = x.cols();
  const int tree_count = int_param(model.params, "trees");
  if (tree_count < 1) throw UsageError("trees must be at least 1");
  const bool bootstrap = model.params.at("bootstrap") != 0;

  std::size_t mtry = static_cast<std::size_t>(int_param(model.params, "mtry"));
  if (mtry == 0)
    mtry = static_cast<std::size_t>((q + 2) / 3);  // ceil(q/3)
  mtry = std::min(mtry, static_cast<std::size_t>(q));

  CartConfig config = cart_config(model.params);
  config.mtry = mtry;

  MatrixXd sample_x(n, q);
  VectorXd sample_y(n);
  for (int b = 0; b < tree_count; ++b) {
    Rng tree_rng(Rng::derive(model.seed, static_cast<std::uint64_t>(b)));
    config.rng = &tree_rng;
    if (bootstrap) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index pick = static_cast<Eigen::Index>(
            tree_rng.below(static_cast<std::uint64_t>(n)));
        sample_x.row(i) = x.row(pick);
        sample_y(i) = y(pick);
      }
      model.trees.push_back(CartTree::fit(sample_x, sample_y, config));
    } else {
      model.trees.push_back(CartTree::fit(x, y, config));
    }
  }
}

void fit_boosting(TrainedModel& model, const MatrixXd& x, const VectorXd& y) {
  const double nu = model.params.at("learning_rate");
  if (!(nu > 0 && nu <= 1)) throw UsageError("learning_rate must lie in (0, 1]");
  const int stages = int_param(model.params, "stages");
  if (stages < 1) throw UsageError("stages must be at least 1");
  const CartConfig config = cart_config(model.params);

  const double n = static_cast<double>(x.rows());
  model.base_prediction = y.mean();
  VectorXd residual = y.array() - model.base_prediction;

  for (int stage = 0; stage < stages; ++stage) {
    CartTree tree = CartTree::fit(x, residual, config);
    residual -= nu * tree.predict(x);
    model.trees.push_back(std::move(tree));
    model.stage_train_mse.push_back(residual.squaredNorm() / n);
  }
}

void fit_adaboost(TrainedModel& model, const MatrixXd& x, const VectorXd& y) {
  const Eigen::Index n = x.rows();
  const int learners = int_param(model.params, "learners");
  if (learners < 1) throw UsageError("learners must be at least 1");
  const CartConfig config = cart_config(model.params);

  VectorXd weights = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  MatrixXd sample_x(n, x.cols());
  VectorXd sample_y(n);

  for (int t = 0; t < learners; ++t) {
    Rng stage_rng(Rng::derive(model.seed, static_cast<std::uint64_t>(t)));

    // Drucker resampling: draw the stage's training set from the current
    // weight distribution by inverse CDF.
    VectorXd cumulative(n);
    double acc = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += weights(i);
      cumulative(i) = acc;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = stage_rng.uniform() * acc;
      const Eigen::Index pick = static_cast<Eigen::Index>(
          std::lower_bound(cumulative.data(), cumulative.data() + n, u) -
          cumulative.data());
      const Eigen::Index row = std::min(pick, n - 1);
      sample_x.row(i) = x.row(row);
      sample_y(i) = y(row);
    }

    CartTree tree = CartTree::fit(sample_x, sample_y, config);
    const VectorXd errors = (tree.predict(x) - y).cwiseAbs();
    const double max_error = errors.maxCoeff();
    if (max_error <= 0) {  // perfect learner dominates the median
      model.trees.push_back(std::move(tree));
      model.tree_weights.push_back(std::log(1e10));
      break;
    }
    const double avg_loss = weights.dot(errors) / max_error;
    if (avg_loss >= 0.5) {
      // Boosting assumption broken; keep one learner so predict is defined.
      if (model.trees.empty()) {
        model.trees.push_back(std::move(tree));
        model.tree_weights.push_back(1.0);
      }
      break;
    }
    if (avg_loss < 1e-12) {
      model.trees.push_back(std::move(tree));
      model.tree_weights.push_back(std::log(1e10));
      break;
    }

    const double beta = avg_loss / (1.0 - avg_loss);
    for (Eigen::Index i = 0; i < n; ++i)
      weights(i) *= std::pow(beta, 1.0 - errors(i) / max_error);
    weights /= weights.sum();
    model.trees.push_back(std::move(tree));
    model.tree_weights.push_back(std::log(1.0 / beta));
  }
}

double weighted_median(std::vector<std::pair<double, double>>& pred_weight) {
  std::sort(pred_weight.begin(), pred_weight.end());
  double total = 0;
  for (const auto& [pred, weight] : pred_weight) total += weight;
  double acc = 0;
  for (const auto& [pred, weight] : pred_weight) {
    acc += weight;
    if (acc >= 0.5 * total) return pred;
  }
  return pred_weight.back().first;
}

}  // namespace

const char* to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::ols: return "ols";
    case ModelFamily::ridge: return "ridge";
    case ModelFamily::lasso: return "lasso";
    case ModelFamily::bayesian_ridge: return "bayesian_ridge";
    case ModelFamily::cart: return "cart";
    case ModelFamily::random_forest: return "random_forest";
    case ModelFamily::gradient_boosting: return "gradient_boosting";
    case ModelFamily::adaboost_r2: return "adaboost_r2";
  }
  return "ols";
}

ModelFamily model_family_from_string(const std::string& name) {
  for (ModelFamily family : all_model_families())
    if (name == to_string(family)) return family;
  throw UsageError("unknown model family '" + name + "'");
}

const std::vector<ModelFamily>& all_model_families() {
  static const std::vector<ModelFamily> families = {
      ModelFamily::ols,
      ModelFamily::ridge,
      ModelFamily::lasso,
      ModelFamily::bayesian_ridge,
      ModelFamily::cart,
      ModelFamily::random_forest,
      ModelFamily::gradient_boosting,
      ModelFamily::adaboost_r2};
  return families;
}

TrainedModel fit(const ModelSpec& spec, const MatrixXd& x, const VectorXd& y,
                 std::vector<std::string> feature_names) {
  if (x.cols() == 0) throw DataError("model fit requires at least one feature");
  if (x.rows() == 0 || x.rows() != y.size())
    throw DataError("model fit requires matching nonempty x and y");
  if (!x.allFinite() || !y.allFinite())
    throw DataError("model fit inputs contain NaN or Inf");
  if (feature_names.size() != static_cast<std::size_t>(x.cols()))
    throw DataError("feature name count does not match design columns");

  TrainedModel model;
  model.family = spec.family;
  model.params = apply_defaults(spec.family, spec.params);
  model.seed = spec.seed;
  model.feature_names = std::move(feature_names);

  switch (spec.family) {
    case ModelFamily::ols: fit_ols(model, x, y); break;
    case ModelFamily::ridge:
      fit_linear_raw(model, ridge_on_standardized(x, y, model.params.at("lambda")));
      break;
    case ModelFamily::lasso: fit_lasso(model, x, y); break;
    case ModelFamily::bayesian_ridge: fit_bayesian_ridge(model, x, y); break;
    case ModelFamily::cart:
      model.trees.push_back(CartTree::fit(x, y, cart_config(model.params)));
      break;
    case ModelFamily::random_forest: fit_forest(model, x, y); break;
    case ModelFamily::gradient_boosting: fit_boosting(model, x, y); break;
    case ModelFamily::adaboost_r2: fit_adaboost(model, x, y); break;
  }
  return model;
}

VectorXd TrainedModel::predict(const MatrixXd& x) const {
  if (x.cols() != static_cast<Eigen::Index>(feature_names.size()))
    throw DataError("prediction design has the wrong number of columns");

  switch (family) {
    case ModelFamily::ols:
    case ModelFamily::ridge:
    case ModelFamily::lasso:
    case ModelFamily::bayesian_ridge:
      return ((x * coefficients).array() + intercept).matrix();
    case ModelFamily::cart:
      return trees.front().predict(x);
    case ModelFamily::random_forest: {
      VectorXd sum = VectorXd::Zero(x.rows());
      for (const CartTree& tree : trees) sum += tree.predict(x);
      return sum / static_cast<double>(trees.size());
    }
    case ModelFamily::gradient_boosting: {
      const double nu = params.at("learning_rate");
      VectorXd out = VectorXd::Constant(x.rows(), base_prediction);
      for (const CartTree& tree : trees) out += nu * tree.predict(x);
      return out;
    }
    case ModelFamily::adaboost_r2: {
      VectorXd out(x.rows());
      std::vector<std::pair<double, double>> pred_weight(trees.size());
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t t = 0; t < trees.size(); ++t)
          pred_weight[t] = {trees[t].predict_row(x, i), tree_weights[t]};
        out(i) = weighted_median(pred_weight);
      }
      return out;
    }
  }
  throw NumericError("unreachable model family");
}

VectorXd TrainedModel::predict(const DataMatrix& data) const {
  MatrixXd aligned(data.rows(), static_cast<Eigen::Index>(feature_names.size()));
  for (std::size_t k = 0; k < feature_names.size(); ++k) {
    const Eigen::Index j = data.index_of(feature_names[k]);
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      aligned(i, static_cast<Eigen::Index>(k)) = data.at(i, j);
  }
  return predict(aligned);
}

std::vector<HyperParams> default_grid(ModelFamily family, Eigen::Index q) {
  std::vector<HyperParams> grid;
  switch (family) {
    case ModelFamily::ols:
    case ModelFamily::bayesian_ridge:
      grid.push_back({});
      break;
    case ModelFamily::ridge:
      for (double lambda : {0.01, 0.1, 1.0, 10.0}) grid.push_back({{"lambda", lambda}});
      break;
    case ModelFamily::lasso:
      for (double ratio : log_spaced_descending(1.0, 1e-3, 20))
        grid.push_back({{"lambda_ratio", ratio}});
      break;
    case ModelFamily::cart:
      for (double depth : {3.0, 6.0, 10.0})
        for (double leaf : {2.0, 5.0})
          grid.push_back({{"max_depth", depth}, {"min_leaf", leaf}});
      break;
    case ModelFamily::random_forest: {
      const double third = std::ceil(static_cast<double>(q) / 3.0);
      const double root = std::ceil(std::sqrt(static_cast<double>(q)));
      grid.push_back({{"trees", 200}, {"mtry", third}});
      if (root != third) grid.push_back({{"trees", 200}, {"mtry", root}});
      break;
    }
    case ModelFamily::gradient_boosting:
      for (double nu : {0.05, 0.1})
        for (double stages : {100.0, 300.0})
          for (double depth : {2.0, 3.0})
            grid.push_back({{"learning_rate", nu},
                            {"stages", stages},
                            {"max_depth", depth}});
      break;
    case ModelFamily::adaboost_r2:
      for (double learners : {50.0, 100.0}) grid.push_back({{"learners", learners}});
      break;
  }
  return grid;
}

VectorXd tree_gain_totals(const TrainedModel& model) {
  switch (model.family) {
    case ModelFamily::cart:
    case ModelFamily::random_forest:
    case ModelFamily::gradient_boosting:
    case ModelFamily::adaboost_r2: break;
    default:
      throw UsageError(
          "feature importance is defined for tree families; use coefficient "
          "magnitudes for linear models");
  }
  const Eigen::Index q = static_cast<Eigen::Index>(model.feature_names.size());
  VectorXd totals = VectorXd::Zero(q);
  for (const CartTree& tree : model.trees) totals += tree.importance(q);
  return totals;
}

}  // namespace bwlab
