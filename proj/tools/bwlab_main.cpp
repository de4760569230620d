// bwlab: command-line front end for the birth-weight modeling toolkit.
//
// Every subcommand reads its inputs, writes its reports into --out, and drops
// a <subcommand>_manifest.json with the effective settings and a content hash
// of the input, so any run can be replayed bit-exactly with --replay.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bwlab/csv.hpp"
#include "bwlab/eda.hpp"
#include "bwlab/errors.hpp"
#include "bwlab/evaluation.hpp"
#include "bwlab/imputation.hpp"
#include "bwlab/json_io.hpp"
#include "bwlab/models.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/selectors.hpp"
#include "bwlab/synthgen.hpp"

namespace {

using namespace bwlab;
using nlohmann::json;

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& v, const std::string& what) {
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw UsageError(what + ": expected a number, got '" + v + "'");
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string item =
        trim(s.substr(start, comma == std::string::npos ? comma : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// `key = value` lines; # starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    ++line_no;
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw UsageError(origin + ":" + std::to_string(line_no) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

// Effective settings of one run: defaults, overlaid by the config file, the
// replay manifest, and finally explicit flags. The full map is echoed into
// the manifest, which is what makes replay possible.
class Settings {
 public:
  void declare(const std::string& key, const std::string& default_value) {
    values_[key] = default_value;
  }

  void apply(const std::map<std::string, std::string>& layer, const std::string& origin) {
    for (const auto& [key, value] : layer) {
      if (key == "out") continue;  // destination is chosen per invocation
      if (!values_.count(key))
        throw UsageError(origin + ": unknown setting '" + key + "'");
      values_[key] = value;
    }
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& effective() const { return values_; }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("internal: setting '" + key + "' undeclared");
    return it->second;
  }

  std::string required(const std::string& key) const {
    const std::string& v = str(key);
    if (v.empty()) throw UsageError("missing required setting --" + key);
    return v;
  }

  double num(const std::string& key) const {
    return parse_number(str(key), "--" + key);
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& v = str(key);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
      throw UsageError("--" + key + ": expected a non-negative integer, got '" + v + "'");
    return out;
  }

  std::size_t size(const std::string& key) const {
    return static_cast<std::size_t>(u64(key));
  }

  std::vector<std::string> list(const std::string& key) const {
    return split_list(str(key));
  }

  bool has(const std::string& key) const { return !str(key).empty(); }

 private:
  std::map<std::string, std::string> values_;
};

struct OptionSpec {
  const char* key;
  const char* def;
  const char* help;
};

struct SubCommand {
  CLI::App* app = nullptr;
  std::vector<OptionSpec> options;
  std::map<std::string, std::string> staging;
  std::map<std::string, CLI::Option*> bound;
  bool takes_input = false;
  std::string input_staging;
  CLI::Option* input_option = nullptr;
  std::string config_path;
  std::string replay_path;
  std::string out_staging;
  CLI::Option* out_option = nullptr;
};

SubCommand& add_subcommand(CLI::App& root, std::deque<SubCommand>& store, const char* name,
                           const char* description, std::vector<OptionSpec> options,
                           bool takes_input) {
  SubCommand& sub = store.emplace_back();
  sub.app = root.add_subcommand(name, description);
  sub.options = std::move(options);
  sub.takes_input = takes_input;
  if (takes_input)
    sub.input_option = sub.app->add_option("input", sub.input_staging, "input file");
  for (const OptionSpec& spec : sub.options) {
    sub.staging[spec.key] = "";
    sub.bound[spec.key] =
        sub.app->add_option("--" + std::string(spec.key), sub.staging[spec.key], spec.help);
  }
  sub.app->add_option("--config", sub.config_path, "key = value settings file");
  sub.app->add_option("--replay", sub.replay_path, "manifest of a previous run to replay");
  sub.out_option = sub.app->add_option("--out", sub.out_staging,
                                       "output directory (default $BWLAB_OUT or .)");
  return sub;
}

// Paths and provenance of the run being executed.
struct RunContext {
  Settings settings;
  std::string out_dir;
  std::string input_path;   // empty for generators
  std::string input_bytes;  // raw content backing the manifest hash
};

void guard_output_path(const RunContext& ctx, const std::string& path) {
  namespace fs = std::filesystem;
  if (ctx.input_path.empty() || !fs::exists(path)) return;
  std::error_code ec;
  if (fs::equivalent(path, ctx.input_path, ec) && !ec)
    throw DataError("refusing to overwrite the input file " + ctx.input_path);
}

void write_output(const RunContext& ctx, const std::string& name, const std::string& content) {
  const std::string path = (std::filesystem::path(ctx.out_dir) / name).string();
  guard_output_path(ctx, path);
  write_text_file(path, content);
}

void write_manifest(const RunContext& ctx, const std::string& subcommand, std::uint64_t seed) {
  Manifest manifest;
  manifest.subcommand = subcommand;
  manifest.seed = seed;
  manifest.input_path = ctx.input_path;
  manifest.input_hash = content_hash(ctx.input_bytes);
  manifest.config = ctx.settings.effective();
  write_output(ctx, subcommand + "_manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

RunContext finalize(SubCommand& sub) {
  RunContext ctx;
  for (const OptionSpec& spec : sub.options) ctx.settings.declare(spec.key, spec.def);
  if (sub.takes_input) ctx.settings.declare("input", "");

  if (!sub.config_path.empty())
    ctx.settings.apply(parse_config_text(read_text_file(sub.config_path), sub.config_path),
                       sub.config_path);

  std::string replay_hash;
  if (!sub.replay_path.empty()) {
    json doc;
    try {
      doc = json::parse(read_text_file(sub.replay_path));
    } catch (const json::exception& e) {
      throw DataError(sub.replay_path + ": " + e.what());
    }
    const Manifest manifest = manifest_from_json(doc);
    if (manifest.subcommand != sub.app->get_name())
      throw UsageError(sub.replay_path + " records a '" + manifest.subcommand +
                       "' run, not '" + sub.app->get_name() + "'");
    ctx.settings.apply(manifest.config, sub.replay_path);
    replay_hash = manifest.input_hash;
  }

  for (const OptionSpec& spec : sub.options)
    if (sub.bound.at(spec.key)->count() > 0) ctx.settings.set(spec.key, sub.staging[spec.key]);

  bool input_overridden = false;
  if (sub.takes_input && sub.input_option->count() > 0) {
    ctx.settings.set("input", sub.input_staging);
    input_overridden = true;
  }

  if (sub.out_option->count() > 0) {
    ctx.out_dir = sub.out_staging;
  } else if (const char* env = std::getenv("BWLAB_OUT"); env && *env) {
    ctx.out_dir = env;
  } else {
    ctx.out_dir = ".";
  }
  std::filesystem::create_directories(ctx.out_dir);

  if (sub.takes_input) {
    ctx.input_path = ctx.settings.required("input");
    ctx.input_bytes = read_text_file(ctx.input_path);
    // A replayed run must see the bytes it recorded unless the caller
    // explicitly pointed it at a new input.
    if (!replay_hash.empty() && !input_overridden &&
        content_hash(ctx.input_bytes) != replay_hash)
      throw DataError(ctx.input_path + " no longer matches the replayed manifest");
  }
  return ctx;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += csv_escape(header[j]);
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += csv_escape(row[j]);
    }
    out += '\n';
  }
  return out;
}

PipelineMode mode_from_string(const std::string& name) {
  if (name == "paper") return PipelineMode::paper;
  if (name == "leak_free" || name == "leak-free") return PipelineMode::leak_free;
  throw UsageError("--mode must be 'paper' or 'leak_free', got '" + name + "'");
}

std::vector<std::string> resolve_selectors(const Settings& s) {
  std::vector<std::string> names = s.list("selectors");
  if (names.empty() || (names.size() == 1 && names[0] == "all")) {
    names.clear();
    for (const SelectorEntry& entry : all_selectors()) names.push_back(entry.name);
  }
  return names;
}

std::vector<ModelEntry> resolve_models(const Settings& s) {
  const std::vector<ModelEntry>& catalog = default_model_list();
  std::vector<std::string> names = s.list("models");
  if (names.empty() || (names.size() == 1 && names[0] == "default")) return catalog;
  std::vector<ModelEntry> out;
  for (const std::string& name : names) {
    bool found = false;
    for (const ModelEntry& entry : catalog) {
      if (entry.name == name) {
        out.push_back(entry);
        found = true;
        break;
      }
    }
    if (!found) {
      std::string known;
      for (const ModelEntry& entry : catalog)
        known += (known.empty() ? "" : ", ") + entry.name;
      throw UsageError("unknown model entry '" + name + "' (known: " + known + ")");
    }
  }
  return out;
}

ImputationConfig imputation_from(const Settings& s, std::uint64_t seed) {
  ImputationConfig config;
  config.mice_cycles = s.size("mice-cycles");
  config.pmm_donors = s.size("pmm-donors");
  config.knn_k = s.size("knn-k");
  config.ridge_lambda = s.num("ridge-lambda");
  config.seed = seed;
  return config;
}

VectorXd target_vector(const DataMatrix& data, const std::string& target) {
  const Eigen::Index col = data.index_of(target);
  if (data.observed_count(col) != static_cast<std::size_t>(data.rows()))
    throw DataError("target column '" + target + "' has missing values");
  VectorXd y(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) y[i] = data.at(i, col);
  return y;
}

// ---------------------------------------------------------------------------
// eda

int cmd_eda(const RunContext& ctx) {
  const DataMatrix data = parse_csv(ctx.input_bytes);
  const DataMatrix classified = classify_columns(data);

  json columns = json::array();
  for (Eigen::Index j = 0; j < classified.cols(); ++j)
    columns.push_back({{"name", classified.name(j)},
                       {"kind", to_string(classified.meta(j).kind)},
                       {"distribution", to_string(classified.meta(j).distribution)}});

  const std::vector<std::string> mcar_columns = ctx.settings.list("columns");
  const McarTestResult mcar = little_mcar_test(
      data, mcar_columns.empty() ? std::nullopt
                                 : std::optional<std::vector<std::string>>(mcar_columns));

  json report{{"summary", summary_to_json(summarize(data))},
              {"columns", columns},
              {"distribution_table",
               distribution_table_to_json(tabulate_distributions(classified))},
              {"missingness", missingness_to_json(missingness_profile(data))},
              {"mcar", mcar_to_json(mcar)}};
  write_output(ctx, "eda.json", report.dump(2) + "\n");
  write_manifest(ctx, "eda", 0);
  std::cout << "eda: " << data.rows() << " rows, " << data.cols() << " columns; mcar "
            << (mcar.applicable ? "p=" + fmt_double(mcar.p_value) : "not applicable")
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// impute

int cmd_impute(const RunContext& ctx) {
  const DataMatrix data = parse_csv(ctx.input_bytes);
  const std::uint64_t seed = ctx.settings.u64("seed");
  const ImputationResult result = hybrid_impute(data, imputation_from(ctx.settings, seed));
  write_output(ctx, "completed.csv", csv_to_string(result.completed));
  write_output(ctx, "imputation.json",
               imputation_diagnostics_to_json(result, data.column_names()).dump(2) + "\n");
  write_manifest(ctx, "impute", seed);
  std::size_t cells = 0;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j)
      if (!data.observed(i, j)) ++cells;
  std::cout << "impute: filled " << cells << " cells across " << data.cols()
            << " columns\n";
  return 0;
}

// ---------------------------------------------------------------------------
// select

int cmd_select(const RunContext& ctx) {
  const DataMatrix data = parse_csv(ctx.input_bytes);
  if (!data.all_observed())
    throw DataError("select requires a complete matrix; run impute first");
  const std::string target = ctx.settings.required("target");
  const VectorXd y = target_vector(data, target);
  const DataMatrix features = data.drop_column(data.index_of(target));
  const MatrixXd& x = features.matrix();
  const std::uint64_t seed = ctx.settings.u64("seed");

  SelectorConfig base;
  base.top_k = ctx.settings.size("top-k");

  std::vector<SelectorReport> reports;
  for (const std::string& name : resolve_selectors(ctx.settings)) {
    SelectorConfig config = base;
    config.seed = Rng::derive(seed, "selector:" + name);
    SelectorReport report = run_selector(name, x, y, features.column_names(), config);
    write_output(ctx, "selector_" + name + ".json",
                 selector_report_to_json(report).dump(2) + "\n");
    reports.push_back(std::move(report));
  }

  const ConsensusReport consensus =
      consensus_rank(reports, base.top_k, features.column_names());
  write_output(ctx, "consensus.json", consensus_to_json(consensus).dump(2) + "\n");

  std::vector<std::vector<std::string>> rows;
  for (const ConsensusEntry& e : consensus.entries)
    rows.push_back({e.name, std::to_string(e.frequency), fmt_double(e.borda)});
  write_output(ctx, "selector_frequency.csv",
               render_table({"feature", "frequency", "borda"}, rows));
  write_manifest(ctx, "select", seed);
  std::cout << "select: " << reports.size() << " selectors, consensus of "
            << consensus.entries.size() << " features\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const RunContext& ctx) {
  const DataMatrix raw = parse_csv(ctx.input_bytes);
  const std::string target = ctx.settings.required("target");
  const std::uint64_t seed = ctx.settings.u64("seed");
  raw.index_of(target);

  DataMatrix data = raw.all_observed()
                        ? raw
                        : hybrid_impute(raw, imputation_from(ctx.settings,
                                                             Rng::derive(seed, "impute")))
                              .completed;
  const VectorXd y = target_vector(data, target);
  const DataMatrix features = data.drop_column(data.index_of(target));

  std::vector<std::string> names;
  MatrixXd x;
  const std::string selector = ctx.settings.str("selector");
  if (selector == "none") {
    names = features.column_names();
    x = features.matrix();
  } else {
    SelectorConfig config;
    config.top_k = ctx.settings.size("top-k");
    config.seed = Rng::derive(seed, "selector:" + selector);
    const SelectorReport report =
        run_selector(selector, features.matrix(), y, features.column_names(), config);
    x.resize(features.rows(), static_cast<Eigen::Index>(report.ranked.size()));
    for (std::size_t k = 0; k < report.ranked.size(); ++k) {
      names.push_back(report.ranked[k].name);
      x.col(static_cast<Eigen::Index>(k)) =
          features.matrix().col(features.index_of(report.ranked[k].name));
    }
  }

  const ModelFamily family = model_family_from_string(ctx.settings.str("model"));
  std::vector<HyperParams> grid;
  if (ctx.settings.has("param")) {
    HyperParams point;
    for (const std::string& kv : ctx.settings.list("param")) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw UsageError("--param entries look like name=value, got '" + kv + "'");
      point[trim(kv.substr(0, eq))] = parse_number(trim(kv.substr(eq + 1)), "--param");
    }
    grid.push_back(std::move(point));
  } else {
    grid = default_grid(family, x.cols());
  }

  CVConfig cv;
  cv.folds = ctx.settings.size("folds");
  cv.seed = Rng::derive(seed, "cv");
  const GridSearchResult search =
      grid_search(family, grid, x, y, cv, Rng::derive(seed, "model"));

  const ModelSpec spec{family, search.best, Rng::derive(seed, "final")};
  const TrainedModel model = fit(spec, x, y, names);

  write_output(ctx, "model.json", model_to_json(model).dump(2) + "\n");
  json chosen = json::object();
  for (const auto& [key, value] : search.best) chosen[key] = value;
  json metrics{{"cv_metrics", metrics_to_json(search.cv_metrics)},
               {"chosen_params", chosen},
               {"grid_failures", search.failures}};
  write_output(ctx, "train_metrics.json", metrics.dump(2) + "\n");
  write_manifest(ctx, "train", seed);
  std::cout << "train: " << to_string(family) << " on " << names.size()
            << " features, cv rmse " << fmt_double(search.cv_metrics.rmse) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const RunContext& ctx) {
  const std::string model_path = ctx.settings.required("model");
  const std::string model_bytes = read_text_file(model_path);
  json doc;
  try {
    doc = json::parse(model_bytes);
  } catch (const json::exception& e) {
    throw DataError(model_path + ": " + e.what());
  }
  const TrainedModel model = model_from_json(doc);

  const DataMatrix data = parse_csv(ctx.input_bytes);
  const VectorXd predictions = model.predict(data);

  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < predictions.size(); ++i)
    rows.push_back({std::to_string(i), fmt_double(predictions[i])});
  write_output(ctx, "predictions.csv", render_table({"row", "prediction"}, rows));

  const std::string target = ctx.settings.str("target");
  if (!target.empty()) {
    const Eigen::Index col = data.index_of(target);
    std::vector<double> seen_y, seen_pred;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      if (!data.observed(i, col)) continue;
      seen_y.push_back(data.at(i, col));
      seen_pred.push_back(predictions[i]);
    }
    if (seen_y.size() >= 2) {
      const Metrics metrics = compute_metrics(
          Eigen::Map<const VectorXd>(seen_y.data(), static_cast<Eigen::Index>(seen_y.size())),
          Eigen::Map<const VectorXd>(seen_pred.data(),
                                     static_cast<Eigen::Index>(seen_pred.size())));
      write_output(ctx, "metrics.json", metrics_to_json(metrics).dump(2) + "\n");
      std::cout << "predict: rmse " << fmt_double(metrics.rmse) << ", r2 "
                << fmt_double(metrics.r2) << " on " << seen_y.size() << " labeled rows\n";
    } else {
      std::cout << "predict: fewer than 2 labeled rows, metrics skipped\n";
    }
  } else {
    std::cout << "predict: " << predictions.size() << " rows\n";
  }

  Manifest manifest;
  manifest.subcommand = "predict";
  manifest.input_path = ctx.input_path;
  manifest.input_hash = content_hash(ctx.input_bytes);
  manifest.config = ctx.settings.effective();
  manifest.config["model_hash"] = content_hash(model_bytes);
  write_output(ctx, "predict_manifest.json", manifest_to_json(manifest).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// grid

std::vector<std::vector<std::string>> leaderboard_rows(
    const std::vector<EvalRecord>& records, const std::vector<std::size_t>& order,
    std::size_t limit) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < order.size() && i < limit; ++i) {
    const EvalRecord& r = records[order[i]];
    rows.push_back({r.selector_name, "knn+mice", r.model_name,
                    fmt_double(r.holdout_metrics.r2), fmt_double(r.holdout_metrics.rmse),
                    r.note});
  }
  return rows;
}

const std::vector<std::string> kLeaderboardHeader = {"selector", "imputer", "model",
                                                     "r2",       "rmse",    "note"};

int cmd_grid(const RunContext& ctx) {
  const DataMatrix data = parse_csv(ctx.input_bytes);
  const std::string target = ctx.settings.required("target");
  const std::uint64_t seed = ctx.settings.u64("seed");

  ComboConfig config;
  config.cv.folds = ctx.settings.size("folds");
  config.cv.holdout_fraction = ctx.settings.num("holdout-fraction");
  config.mode = mode_from_string(ctx.settings.str("mode"));
  config.imputation = imputation_from(ctx.settings, 0);  // run_grid derives the seed
  config.selector.top_k = ctx.settings.size("top-k");
  config.extra_columns = ctx.settings.list("extra-columns");
  config.seed = seed;

  const std::vector<std::string> selectors = resolve_selectors(ctx.settings);
  const std::vector<ModelEntry> models = resolve_models(ctx.settings);
  const std::size_t workers = ctx.settings.size("workers");

  const GridRunResult result = run_grid(selectors, models, data, target, config, workers);

  write_output(ctx, "leaderboard.csv",
               render_table(kLeaderboardHeader,
                            leaderboard_rows(result.records, result.leaderboard,
                                             result.leaderboard.size())));

  json records = json::array();
  for (const EvalRecord& r : result.records) records.push_back(eval_record_to_json(r));
  write_output(ctx, "records.json", json{{"records", records}}.dump(2) + "\n");

  std::vector<std::vector<std::string>> freq_rows;
  for (const auto& [name, count] : result.selector_frequency)
    freq_rows.push_back({name, std::to_string(count)});
  write_output(ctx, "selector_frequency.csv",
               render_table({"selector", "count"}, freq_rows));

  if (!result.leaderboard.empty()) {
    const EvalRecord& winner = result.records[result.leaderboard.front()];
    const VectorXd y = target_vector(data, target);
    const DataMatrix features = data.drop_column(data.index_of(target));
    // Reporting completion: reuses the run's imputation stream so the paper
    // mode winner sees exactly the matrix it was fit on.
    const DataMatrix completed =
        features.all_observed()
            ? features
            : hybrid_impute(features,
                            imputation_from(ctx.settings, Rng::derive(seed, "impute")))
                  .completed;

    const ResidualBins bins = residual_analysis(winner.final_model, completed, y);
    std::vector<std::vector<std::string>> bin_rows;
    for (std::size_t b = 0; b < bins.counts.size(); ++b) {
      const std::string label =
          b + 1 < bins.edges.size()
              ? fmt_double(bins.edges[b]) + "-" + fmt_double(bins.edges[b + 1])
              : fmt_double(bins.edges[b]) + "+";
      bin_rows.push_back({label, std::to_string(bins.counts[b]),
                          fmt_double(bins.percentages[b])});
    }
    write_output(ctx, "residual_bins.csv",
                 render_table({"range", "count", "percentage"}, bin_rows));

    std::vector<ImportanceEntry> importance;
    try {
      importance = feature_importance_report(winner.final_model);
    } catch (const UsageError&) {
      // Linear winner: coefficient magnitudes normalized to shares.
      double total = 0;
      for (Eigen::Index k = 0; k < winner.final_model.coefficients.size(); ++k)
        total += std::abs(winner.final_model.coefficients[k]);
      for (std::size_t k = 0; k < winner.final_model.feature_names.size(); ++k) {
        const double c = std::abs(winner.final_model.coefficients[static_cast<Eigen::Index>(k)]);
        importance.push_back({winner.final_model.feature_names[k],
                              total > 0 ? c / total : 0.0});
      }
    }
    std::vector<std::vector<std::string>> imp_rows;
    for (const ImportanceEntry& e : importance)
      imp_rows.push_back({e.feature, fmt_double(e.share)});
    write_output(ctx, "feature_importance.csv",
                 render_table({"feature", "share"}, imp_rows));

    json winner_doc = eval_record_to_json(winner);
    winner_doc["mean_abs_error"] = bins.mean_abs_error;
    write_output(ctx, "winner.json", winner_doc.dump(2) + "\n");

    std::cout << "grid: " << result.records.size() << " combos, best "
              << winner.selector_name << " + " << winner.model_name << " (rmse "
              << fmt_double(winner.holdout_metrics.rmse) << ", r2 "
              << fmt_double(winner.holdout_metrics.r2) << ")\n";
  } else {
    std::cout << "grid: " << result.records.size() << " combos, all failed\n";
  }

  write_manifest(ctx, "grid", seed);
  return 0;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(RunContext& ctx) {
  CohortSpec spec;
  const Settings& s = ctx.settings;
  if (s.has("n")) spec.n = static_cast<Eigen::Index>(s.u64("n"));
  if (s.has("p")) spec.p = static_cast<Eigen::Index>(s.u64("p"));
  if (s.has("gaussian-count")) spec.gaussian_count = s.size("gaussian-count");
  if (s.has("lognormal-count")) spec.lognormal_count = s.size("lognormal-count");
  if (s.has("gamma-count")) spec.gamma_count = s.size("gamma-count");
  if (s.has("discrete-count")) spec.discrete_count = s.size("discrete-count");
  if (s.has("coefficients")) {
    spec.coefficients.clear();
    for (const std::string& c : s.list("coefficients"))
      spec.coefficients.push_back(parse_number(c, "--coefficients"));
  }
  if (s.has("interaction")) spec.interaction_coefficient = s.num("interaction");
  if (s.has("sex-gap")) spec.sex_gap = s.num("sex-gap");
  if (s.has("base-weight")) spec.base_weight = s.num("base-weight");
  if (s.has("noise")) spec.noise_scale = s.num("noise");
  if (s.has("missing-rate")) spec.missing_rate = s.num("missing-rate");
  if (s.has("mechanism"))
    spec.mechanism = missing_mechanism_from_string(s.str("mechanism"));
  spec.seed = s.u64("seed");

  if (s.has("calibrate-r2")) {
    spec.noise_scale = calibrate_noise(spec, s.num("calibrate-r2"));
    // The realized scale replaces the request so a replay regenerates
    // directly instead of re-searching.
    ctx.settings.set("noise", fmt_double(spec.noise_scale));
    ctx.settings.set("calibrate-r2", "");
  }

  const auto [cohort, truth] = generate_cohort(spec);
  write_output(ctx, "cohort.csv", csv_to_string(cohort));
  write_output(ctx, "ground_truth.json", ground_truth_to_json(truth).dump(2) + "\n");
  write_manifest(ctx, "synth", spec.seed);
  std::cout << "synth: " << cohort.rows() << " rows, " << cohort.cols()
            << " columns, noise " << fmt_double(spec.noise_scale) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const RunContext& ctx) {
  json doc;
  try {
    doc = json::parse(ctx.input_bytes);
  } catch (const json::exception& e) {
    throw DataError(ctx.input_path + ": " + e.what());
  }
  if (!doc.contains("records") || !doc["records"].is_array())
    throw DataError(ctx.input_path + ": expected a {\"records\": [...]} document");
  std::vector<EvalRecord> records;
  for (const json& r : doc["records"]) records.push_back(eval_record_from_json(r));

  const std::vector<std::size_t> order = rank_records(records);
  const std::size_t top = ctx.settings.size("top");
  write_output(ctx, "report_leaderboard.csv",
               render_table(kLeaderboardHeader, leaderboard_rows(records, order, top)));

  std::vector<std::string> selector_order;
  for (const EvalRecord& r : records)
    if (std::find(selector_order.begin(), selector_order.end(), r.selector_name) ==
        selector_order.end())
      selector_order.push_back(r.selector_name);
  std::vector<std::vector<std::string>> freq_rows;
  for (const auto& [name, count] : selector_frequency(records, order, selector_order))
    freq_rows.push_back({name, std::to_string(count)});
  write_output(ctx, "report_frequency.csv", render_table({"selector", "count"}, freq_rows));

  std::cout << records.size() << " records, " << order.size() << " ranked\n";
  for (std::size_t i = 0; i < order.size() && i < top && i < 10; ++i) {
    const EvalRecord& r = records[order[i]];
    std::cout << (i + 1) << ". " << r.selector_name << " + " << r.model_name << "  rmse "
              << fmt_double(r.holdout_metrics.rmse) << "  r2 "
              << fmt_double(r.holdout_metrics.r2) << "\n";
  }
  write_manifest(ctx, "report", 0);
  return 0;
}

// ---------------------------------------------------------------------------

int run_app(int argc, char** argv) {
  CLI::App app{"bwlab: birth-weight modeling toolkit"};
  app.require_subcommand(1);
  std::deque<SubCommand> subs;

  SubCommand& eda = add_subcommand(
      app, subs, "eda", "Column summaries, distribution classes, missingness, MCAR test",
      {{"columns", "", "columns for the MCAR test (default: all continuous)"}}, true);

  SubCommand& impute = add_subcommand(
      app, subs, "impute", "Complete a CSV with KNN (discrete) plus MICE (continuous)",
      {{"mice-cycles", "10", "chained-equation sweeps"},
       {"pmm-donors", "5", "predictive mean matching donor pool"},
       {"knn-k", "5", "neighbors for discrete cells"},
       {"ridge-lambda", "0.001", "ridge penalty inside MICE"},
       {"seed", "0", "random seed"}},
      true);

  SubCommand& select = add_subcommand(
      app, subs, "select", "Rank features with the configured selectors and build a consensus",
      {{"target", "", "target column name"},
       {"selectors", "all", "comma list of selectors"},
       {"top-k", "20", "features each selector reports"},
       {"seed", "0", "random seed"}},
      true);

  SubCommand& train = add_subcommand(
      app, subs, "train", "Grid-search one model family and save the fitted model",
      {{"target", "", "target column name"},
       {"model", "gradient_boosting", "model family"},
       {"selector", "none", "selector applied before training"},
       {"top-k", "20", "features kept by the selector"},
       {"param", "", "comma list name=value fixing the grid to one point"},
       {"folds", "5", "cross-validation folds"},
       {"mice-cycles", "10", "chained-equation sweeps when imputing"},
       {"pmm-donors", "5", "predictive mean matching donor pool"},
       {"knn-k", "5", "neighbors for discrete cells"},
       {"ridge-lambda", "0.001", "ridge penalty inside MICE"},
       {"seed", "0", "random seed"}},
      true);

  SubCommand& predict = add_subcommand(
      app, subs, "predict", "Apply a saved model to a CSV",
      {{"model", "", "model.json produced by train"},
       {"target", "", "optional target column for metrics"}},
      true);

  SubCommand& grid = add_subcommand(
      app, subs, "grid", "Evaluate every selector x model combination",
      {{"target", "", "target column name"},
       {"selectors", "all", "comma list of selectors"},
       {"models", "default", "comma list of model entries"},
       {"mode", "paper", "pipeline mode: paper or leak_free"},
       {"folds", "5", "cross-validation folds"},
       {"holdout-fraction", "0.2", "rows held out per combo"},
       {"top-k", "20", "features each selector reports"},
       {"extra-columns", "", "columns forced into every design"},
       {"workers", "1", "evaluation threads"},
       {"mice-cycles", "10", "chained-equation sweeps"},
       {"pmm-donors", "5", "predictive mean matching donor pool"},
       {"knn-k", "5", "neighbors for discrete cells"},
       {"ridge-lambda", "0.001", "ridge penalty inside MICE"},
       {"seed", "0", "random seed"}},
      true);

  SubCommand& synth = add_subcommand(
      app, subs, "synth", "Generate a synthetic cohort with planted ground truth",
      {{"n", "", "rows (default 791)"},
       {"p", "", "feature columns (default 109)"},
       {"gaussian-count", "", "gaussian columns (default 17)"},
       {"lognormal-count", "", "lognormal columns (default 47)"},
       {"gamma-count", "", "gamma columns (default 25)"},
       {"discrete-count", "", "discrete columns (default 20)"},
       {"coefficients", "", "eight driver coefficients in grams per sd"},
       {"interaction", "", "gestational age x placental weight coefficient"},
       {"sex-gap", "", "planted male-female gap in grams"},
       {"base-weight", "", "intercept in grams"},
       {"noise", "", "residual scale in grams"},
       {"missing-rate", "", "fraction of feature cells hidden"},
       {"mechanism", "", "missingness mechanism: mcar, mar, mnar"},
       {"calibrate-r2", "", "choose the noise scale to hit this true-design r2"},
       {"seed", "0", "random seed"}},
      false);

  SubCommand& report = add_subcommand(
      app, subs, "report", "Summarize a records.json produced by grid",
      {{"top", "20", "leaderboard rows to keep"}}, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  if (eda.app->parsed()) {
    RunContext ctx = finalize(eda);
    return cmd_eda(ctx);
  }
  if (impute.app->parsed()) {
    RunContext ctx = finalize(impute);
    return cmd_impute(ctx);
  }
  if (select.app->parsed()) {
    RunContext ctx = finalize(select);
    return cmd_select(ctx);
  }
  if (train.app->parsed()) {
    RunContext ctx = finalize(train);
    return cmd_train(ctx);
  }
  if (predict.app->parsed()) {
    RunContext ctx = finalize(predict);
    return cmd_predict(ctx);
  }
  if (grid.app->parsed()) {
    RunContext ctx = finalize(grid);
    return cmd_grid(ctx);
  }
  if (synth.app->parsed()) {
    RunContext ctx = finalize(synth);
    return cmd_synth(ctx);
  }
  if (report.app->parsed()) {
    RunContext ctx = finalize(report);
    return cmd_report(ctx);
  }
  std::cerr << app.help() << std::flush;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const bwlab::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const bwlab::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const bwlab::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
