#include <doctest.h>

#include <cmath>

#include "bwlab/errors.hpp"
#include "bwlab/json_io.hpp"
#include "bwlab/models.hpp"
#include "bwlab/rng.hpp"

using namespace bwlab;
using nlohmann::json;

namespace {

MatrixXd random_matrix(Rng& rng, Eigen::Index n, Eigen::Index p) {
  MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal(0, 1);
  return x;
}

}  // namespace

TEST_CASE("content_hash matches the published fnv-1a vectors") {
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");
  CHECK(content_hash("foobar") == "85944171f73967e8");
}

TEST_CASE("selector report round-trips through json") {
  SelectorReport report;
  report.selector_name = "pearson";
  report.ranked = {{"ga", 0.91}, {"pw", 0.5}, {"fh", -0.25}};
  report.metadata["note"] = "abs correlation";
  const SelectorReport back =
      selector_report_from_json(selector_report_to_json(report));
  CHECK(back.selector_name == report.selector_name);
  REQUIRE(back.ranked.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.ranked[i].name == report.ranked[i].name);
    CHECK(back.ranked[i].score == report.ranked[i].score);
  }
  CHECK(back.metadata == report.metadata);
}

TEST_CASE("eval record round-trips through json") {
  EvalRecord record;
  record.selector_name = "lasso";
  record.model_name = "ridge_strong";
  record.family = ModelFamily::ridge;
  record.chosen_params = {{"lambda", 10.0}};
  record.cv_metrics = {101.25, std::sqrt(101.25), 0.6217};
  record.holdout_metrics = {99.0, std::sqrt(99.0), 0.63};
  record.note = "lasso{lambda_ratio=5}: lambda_ratio must lie in (0, 1]";
  const EvalRecord back = eval_record_from_json(eval_record_to_json(record));
  CHECK(back.selector_name == record.selector_name);
  CHECK(back.model_name == record.model_name);
  CHECK(back.family == record.family);
  CHECK(back.chosen_params == record.chosen_params);
  CHECK(back.cv_metrics.mse == record.cv_metrics.mse);
  CHECK(back.cv_metrics.rmse == record.cv_metrics.rmse);
  CHECK(back.cv_metrics.r2 == record.cv_metrics.r2);
  CHECK(back.holdout_metrics.rmse == record.holdout_metrics.rmse);
  CHECK(back.note == record.note);
  CHECK_FALSE(back.failed);
}

TEST_CASE("linear model predicts identically after a json round trip") {
  Rng rng(31);
  const MatrixXd x = random_matrix(rng, 80, 5);
  VectorXd y = x * VectorXd::LinSpaced(5, -2, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += rng.normal(0, 0.1);

  const TrainedModel model =
      fit(ModelSpec{ModelFamily::bayesian_ridge, {}, 7}, x, y,
          {"a", "b", "c", "d", "e"});
  const TrainedModel back = model_from_json(model_to_json(model));

  CHECK(back.family == model.family);
  CHECK(back.feature_names == model.feature_names);
  CHECK(back.intercept == model.intercept);
  CHECK(back.noise_precision == model.noise_precision);
  const VectorXd p0 = model.predict(x);
  const VectorXd p1 = back.predict(x);
  for (Eigen::Index i = 0; i < p0.size(); ++i) CHECK(p0[i] == p1[i]);
}

TEST_CASE("boosted tree model predicts identically after a json round trip") {
  Rng rng(32);
  const MatrixXd x = random_matrix(rng, 120, 4);
  VectorXd y(120);
  for (Eigen::Index i = 0; i < 120; ++i)
    y[i] = x(i, 0) * x(i, 1) + 0.5 * x(i, 2) + rng.normal(0, 0.05);

  const TrainedModel model =
      fit(ModelSpec{ModelFamily::gradient_boosting,
                    {{"learning_rate", 0.1}, {"stages", 40}, {"max_depth", 2}},
                    11},
          x, y, {"a", "b", "c", "d"});
  REQUIRE(!model.trees.empty());
  const TrainedModel back = model_from_json(model_to_json(model));
  REQUIRE(back.trees.size() == model.trees.size());
  CHECK(back.base_prediction == model.base_prediction);
  CHECK(back.stage_train_mse == model.stage_train_mse);

  Rng probe_rng(33);
  const MatrixXd probe = random_matrix(probe_rng, 50, 4);
  const VectorXd p0 = model.predict(probe);
  const VectorXd p1 = back.predict(probe);
  for (Eigen::Index i = 0; i < p0.size(); ++i) CHECK(p0[i] == p1[i]);
}

TEST_CASE("model parser rejects foreign and versionless documents") {
  CHECK_THROWS_AS(model_from_json(json{{"format", "other"}}), DataError);
  CHECK_THROWS_AS(model_from_json(json{{"format", "bwlab-model"}, {"version", 9}}),
                  DataError);
  json truncated{{"format", "bwlab-model"}, {"version", 1}, {"family", "ols"}};
  CHECK_THROWS_AS(model_from_json(truncated), DataError);
}

TEST_CASE("manifest round-trips and hashes its config deterministically") {
  Manifest manifest;
  manifest.subcommand = "grid";
  manifest.seed = 99;
  manifest.input_path = "cohort.csv";
  manifest.input_hash = content_hash("rows");
  manifest.config = {{"mode", "paper"}, {"seed", "99"}, {"folds", "5"}};

  const json doc = manifest_to_json(manifest);
  CHECK(doc.at("config_hash") == doc.at("config_hash"));
  const Manifest back = manifest_from_json(doc);
  CHECK(back.subcommand == manifest.subcommand);
  CHECK(back.seed == manifest.seed);
  CHECK(back.input_path == manifest.input_path);
  CHECK(back.input_hash == manifest.input_hash);
  CHECK(back.config == manifest.config);

  // Same settings, same hash; any change moves it.
  const json again = manifest_to_json(back);
  CHECK(again.at("config_hash") == doc.at("config_hash"));
  manifest.config["folds"] = "10";
  CHECK(manifest_to_json(manifest).at("config_hash") != doc.at("config_hash"));
}

TEST_CASE("manifest parser rejects foreign documents") {
  CHECK_THROWS_AS(manifest_from_json(json{{"format", "nope"}}), DataError);
}

TEST_CASE("doubles survive json serialization bit-exactly") {
  Rng rng(34);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal(0, 1) * std::pow(10.0, rng.normal(0, 3));
    const json j = json::parse(json(v).dump());
    CHECK(j.get<double>() == v);
  }
}
