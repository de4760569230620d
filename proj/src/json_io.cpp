#include "bwlab/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bwlab/errors.hpp"

namespace bwlab {

using nlohmann::json;

namespace {

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vector_from_json(const json& arr) {
  VectorXd v(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const json& x : arr) v[i++] = x.get<double>();
  return v;
}

json params_to_json(const HyperParams& params) {
  json obj = json::object();
  for (const auto& [key, value] : params) obj[key] = value;
  return obj;
}

HyperParams params_from_json(const json& obj) {
  HyperParams params;
  for (const auto& [key, value] : obj.items()) params[key] = value.get<double>();
  return params;
}

/// Rethrows json access errors as DataError with the document name attached.
template <typename F>
auto parse_guard(const char* what, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("short write to " + path);
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json selector_report_to_json(const SelectorReport& report) {
  json ranked = json::array();
  for (const RankedFeature& f : report.ranked)
    ranked.push_back({{"feature", f.name}, {"score", f.score}});
  json meta = json::object();
  for (const auto& [key, value] : report.metadata) meta[key] = value;
  return {{"selector", report.selector_name}, {"ranked", ranked}, {"metadata", meta}};
}

SelectorReport selector_report_from_json(const json& j) {
  return parse_guard("selector report", [&] {
    SelectorReport report;
    report.selector_name = j.at("selector").get<std::string>();
    for (const json& f : j.at("ranked"))
      report.ranked.push_back({f.at("feature").get<std::string>(), f.at("score").get<double>()});
    for (const auto& [key, value] : j.at("metadata").items())
      report.metadata[key] = value.get<std::string>();
    return report;
  });
}

json consensus_to_json(const ConsensusReport& report) {
  json entries = json::array();
  for (const ConsensusEntry& e : report.entries)
    entries.push_back({{"feature", e.name}, {"frequency", e.frequency}, {"borda", e.borda}});
  return {{"entries", entries}};
}

json metrics_to_json(const Metrics& metrics) {
  return {{"mse", metrics.mse}, {"rmse", metrics.rmse}, {"r2", metrics.r2}};
}

Metrics metrics_from_json(const json& j) {
  return parse_guard("metrics", [&] {
    return Metrics{j.at("mse").get<double>(), j.at("rmse").get<double>(),
                   j.at("r2").get<double>()};
  });
}

json eval_record_to_json(const EvalRecord& record) {
  return {{"selector", record.selector_name},
          {"model", record.model_name},
          {"family", to_string(record.family)},
          {"chosen_params", params_to_json(record.chosen_params)},
          {"cv_metrics", metrics_to_json(record.cv_metrics)},
          {"holdout_metrics", metrics_to_json(record.holdout_metrics)},
          {"note", record.note},
          {"failed", record.failed}};
}

EvalRecord eval_record_from_json(const json& j) {
  return parse_guard("eval record", [&] {
    EvalRecord record;
    record.selector_name = j.at("selector").get<std::string>();
    record.model_name = j.at("model").get<std::string>();
    record.family = model_family_from_string(j.at("family").get<std::string>());
    record.chosen_params = params_from_json(j.at("chosen_params"));
    record.cv_metrics = metrics_from_json(j.at("cv_metrics"));
    record.holdout_metrics = metrics_from_json(j.at("holdout_metrics"));
    record.note = j.at("note").get<std::string>();
    record.failed = j.at("failed").get<bool>();
    return record;
  });
}

json model_to_json(const TrainedModel& model) {
  json trees = json::array();
  for (const CartTree& tree : model.trees) {
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes())
      nodes.push_back({n.feature, n.threshold, n.value, n.gain, n.left, n.right});
    trees.push_back(std::move(nodes));
  }
  return {{"format", "bwlab-model"},
          {"version", 1},
          {"family", to_string(model.family)},
          {"params", params_to_json(model.params)},
          {"seed", model.seed},
          {"feature_names", model.feature_names},
          {"coefficients", vector_to_json(model.coefficients)},
          {"intercept", model.intercept},
          {"noise_precision", model.noise_precision},
          {"weight_precision", model.weight_precision},
          {"trees", std::move(trees)},
          {"tree_weights", model.tree_weights},
          {"base_prediction", model.base_prediction},
          {"stage_train_mse", model.stage_train_mse},
          {"warnings", model.warnings}};
}

TrainedModel model_from_json(const json& j) {
  return parse_guard("model file", [&] {
    if (j.value("format", "") != "bwlab-model")
      throw DataError("model file: not a bwlab-model document");
    if (j.at("version").get<int>() != 1)
      throw DataError("model file: unsupported version");
    TrainedModel model;
    model.family = model_family_from_string(j.at("family").get<std::string>());
    model.params = params_from_json(j.at("params"));
    model.seed = j.at("seed").get<std::uint64_t>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.coefficients = vector_from_json(j.at("coefficients"));
    model.intercept = j.at("intercept").get<double>();
    model.noise_precision = j.at("noise_precision").get<double>();
    model.weight_precision = j.at("weight_precision").get<double>();
    for (const json& tree : j.at("trees")) {
      std::vector<TreeNode> nodes;
      nodes.reserve(tree.size());
      for (const json& n : tree) {
        TreeNode node;
        node.feature = n.at(0).get<Eigen::Index>();
        node.threshold = n.at(1).get<double>();
        node.value = n.at(2).get<double>();
        node.gain = n.at(3).get<double>();
        node.left = n.at(4).get<int>();
        node.right = n.at(5).get<int>();
        nodes.push_back(node);
      }
      model.trees.push_back(CartTree::from_nodes(std::move(nodes)));
    }
    model.tree_weights = j.at("tree_weights").get<std::vector<double>>();
    model.base_prediction = j.at("base_prediction").get<double>();
    model.stage_train_mse = j.at("stage_train_mse").get<std::vector<double>>();
    model.warnings = j.at("warnings").get<std::vector<std::string>>();
    return model;
  });
}

json ground_truth_to_json(const GroundTruth& truth) {
  json coefficients = json::object();
  for (const auto& [name, value] : truth.coefficients) coefficients[name] = value;
  json classes = json::array();
  for (Distribution d : truth.column_classes) classes.push_back(to_string(d));
  return {{"relevant", truth.relevant},
          {"coefficients", coefficients},
          {"interaction_coefficient", truth.interaction_coefficient},
          {"sex_gap", truth.sex_gap},
          {"base_weight", truth.base_weight},
          {"noise_scale", truth.noise_scale},
          {"column_classes", classes},
          {"noiseless_target", vector_to_json(truth.noiseless_target)},
          {"plausible_fraction", truth.plausible_fraction}};
}

json summary_to_json(const SummaryStats& stats) {
  json columns = json::array();
  for (std::size_t i = 0; i < stats.columns.size(); ++i) {
    const ColumnSummary& c = stats.columns[i];
    columns.push_back({{"name", stats.column_names[i]},
                       {"count", c.count},
                       {"mean", c.mean},
                       {"sd", c.sd},
                       {"min", c.min},
                       {"q25", c.q25},
                       {"median", c.median},
                       {"q75", c.q75},
                       {"max", c.max}});
  }
  return {{"columns", columns}};
}

json missingness_to_json(const MissingnessProfile& profile) {
  return {{"overall_rate", profile.overall_rate},
          {"per_column_rate", profile.per_column_rate},
          {"pattern_count", profile.pattern_count}};
}

json mcar_to_json(const McarTestResult& result) {
  return {{"d2", result.d2},
          {"df", result.df},
          {"p_value", result.p_value},
          {"applicable", result.applicable},
          {"ridge_stabilized", result.ridge_stabilized},
          {"patterns_used", result.patterns_used},
          {"em_iterations", result.em_iterations},
          {"em_converged", result.em_converged}};
}

json distribution_table_to_json(const DistributionTable& table) {
  return {{"gaussian", table.gaussian},     {"lognormal", table.lognormal},
          {"uniform", table.uniform},       {"gamma", table.gamma},
          {"discrete", table.discrete},     {"poisson", table.poisson},
          {"exponential", table.exponential}, {"unknown", table.unknown}};
}

json imputation_diagnostics_to_json(const ImputationResult& result,
                                    const std::vector<std::string>& column_names) {
  json methods = json::array();
  for (std::size_t j = 0; j < result.per_column_method.size(); ++j)
    methods.push_back({{"column", column_names[j]},
                       {"method", to_string(result.per_column_method[j])}});
  return {{"trace", result.trace},
          {"per_column_method", methods},
          {"knn_mode_fallbacks", result.knn_mode_fallbacks}};
}

json manifest_to_json(const Manifest& manifest) {
  json config = json::object();
  for (const auto& [key, value] : manifest.config) config[key] = value;
  return {{"format", "bwlab-manifest"},
          {"version", 1},
          {"subcommand", manifest.subcommand},
          {"seed", manifest.seed},
          {"input_path", manifest.input_path},
          {"input_hash", manifest.input_hash},
          {"config_hash", content_hash(config.dump())},
          {"config", config}};
}

Manifest manifest_from_json(const json& j) {
  return parse_guard("manifest", [&] {
    if (j.value("format", "") != "bwlab-manifest")
      throw DataError("manifest: not a bwlab-manifest document");
    if (j.at("version").get<int>() != 1) throw DataError("manifest: unsupported version");
    Manifest manifest;
    manifest.subcommand = j.at("subcommand").get<std::string>();
    manifest.seed = j.at("seed").get<std::uint64_t>();
    manifest.input_path = j.at("input_path").get<std::string>();
    manifest.input_hash = j.at("input_hash").get<std::string>();
    for (const auto& [key, value] : j.at("config").items())
      manifest.config[key] = value.get<std::string>();
    return manifest;
  });
}

}  // namespace bwlab
